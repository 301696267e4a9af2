#ifndef DUALPT_RNG_HPP
#define DUALPT_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dualpt::rng {

// FNV-1a, folded with a caller seed. Used to derive stable per-text streams.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0);

// mt19937_64 with hand-rolled draws on top. std::normal_distribution,
// std::shuffle and std::uniform_int_distribution are implementation-defined
// sequences, so everything that must reproduce bit-for-bit goes through the
// explicit Box-Muller / Fisher-Yates / rejection code here instead.
class Generator {
 public:
  explicit Generator(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  // Uniform index in [0, bound) without modulo bias.
  std::size_t index(std::size_t bound);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::vector<double> normal_vector(std::size_t n, Generator& g);

}  // namespace dualpt::rng

#endif  // DUALPT_RNG_HPP
