#ifndef DUALPT_DESCRIPTIONS_HPP
#define DUALPT_DESCRIPTIONS_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dualpt/matrix.hpp"

namespace dualpt::descriptions {

// The query template, byte-exact with {CLASS} substituted once.
std::string build_query(const std::string& class_name);

// Splits a completion into phrases: one per line, bullet markers ("-", "*",
// "1.", "2)"), surrounding whitespace and quotes stripped, empties dropped,
// order preserved.
std::vector<std::string> parse_phrases(const std::string& response_text);

struct CacheMeta {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  std::string created;  // ISO 8601; filled on first save when empty
};

struct DescriptionCache {
  CacheMeta meta;
  std::map<std::string, std::vector<std::string>> classes;  // sorted keys

  bool contains(const std::string& name) const { return classes.count(name) > 0; }
  static DescriptionCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;  // temp file + rename

  friend bool operator==(const DescriptionCache& a, const DescriptionCache& b) {
    return a.meta.model == b.meta.model && a.meta.temperature == b.meta.temperature &&
           a.meta.created == b.meta.created && a.classes == b.classes;
  }
};

// Chat-completion transport. complete() takes the full query text and returns
// the assistant message content.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct ClientConfig {
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  int retries = 1;  // extra attempts on transport failure / 5xx
  int timeout_seconds = 30;
  bool verify_tls = true;
  std::string token_env = "DUALPT_LLM_TOKEN";
};

// POSTs {model, temperature, messages:[{role:"user", content}]} and returns
// the first choice's message content. Bearer token comes from the
// environment variable named in the config.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ClientConfig cfg);
  std::string complete(const std::string& prompt) override;

 private:
  ClientConfig cfg_;
};

// Canned completions keyed by class name, rendered as a bulleted list so the
// parser path is exercised. Counts calls so tests can assert idempotence.
class MockChatClient final : public ChatClient {
 public:
  MockChatClient();  // built-in fixtures (panda et al.)
  explicit MockChatClient(std::map<std::string, std::vector<std::string>> fixtures);
  std::string complete(const std::string& prompt) override;
  int calls() const { return calls_; }

 private:
  std::map<std::string, std::vector<std::string>> fixtures_;
  int calls_ = 0;
};

// Fills the cache for every class not already present; cached classes are
// never re-fetched. Any failure propagates before the cache file is touched.
DescriptionCache fetch_descriptions(const std::vector<std::string>& classes, ChatClient& client,
                                    const CacheMeta& meta,
                                    const std::filesystem::path& cache_path);
DescriptionCache fetch_descriptions(const std::vector<std::string>& classes,
                                    const ClientConfig& config,
                                    const std::filesystem::path& cache_path);

// Deterministic stand-in for a text encoder: hash(text, seed) seeds a
// generator, a standard-normal vector is drawn and unit-normalized. Stable
// across platforms (explicit Box-Muller on mt19937_64).
std::vector<double> mock_encode(const std::string& text, std::size_t dim, std::uint64_t seed);

struct ClassEmbedding {
  Matrix descriptors;          // e_i x d, unit rows
  std::vector<double> anchor;  // empty when absent

  friend bool operator==(const ClassEmbedding& a, const ClassEmbedding& b) {
    return a.descriptors == b.descriptors && a.anchor == b.anchor;
  }
};

struct EmbeddingStore {
  std::size_t dim = 0;
  std::map<std::string, ClassEmbedding> classes;

  static EmbeddingStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim == b.dim && a.classes == b.classes;
  }
};

using Encoder = std::function<std::vector<double>(const std::string&)>;

// One unit row per phrase; the class-name embedding doubles as the anchor.
EmbeddingStore embed_descriptions(const DescriptionCache& cache, const Encoder& encode,
                                  std::size_t dim);

}  // namespace dualpt::descriptions

#endif  // DUALPT_DESCRIPTIONS_HPP
