#ifndef DUALPT_HARNESS_HPP
#define DUALPT_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dualpt/alignment.hpp"
#include "dualpt/descriptions.hpp"
#include "dualpt/matrix.hpp"

namespace dualpt::harness {

// Part-structured synthetic data: every class owns a few unit prototype
// directions ("parts"), tokens are noisy prototypes cycled across the token
// grid together with background prototypes shared by all classes, and the
// descriptors are noisy views of the same parts. Anchors are the class part
// mean plus a bias along one direction shared by every class: the bias skews
// per-class prompt norms (and therefore logits) until the trained context
// cancels it, which is exactly the kind of shared structure the context can
// express. Descriptor centroids are bias-free, so distillation teaches the
// correction without labels.
struct SyntheticConfig {
  int classes = 10;
  int parts_per_class = 4;
  int tokens_per_sample = 49;  // 7x7 local grid
  int dim = 32;
  double noise_sigma = 0.5;
  double descriptor_noise = 0.1;
  double anchor_bias = 1.0;  // strength of the shared anchor corruption
  std::vector<int> shots_train = {1, 2, 4, 8, 16};
  int test_per_class = 20;
  int background_parts = 2;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

enum class Split { Train, Test };

struct Sample {
  Matrix tokens;               // N x d, unit rows
  std::vector<double> global;  // unit mean of the tokens
  int label = 0;
  Split split = Split::Train;
};

struct SyntheticData {
  std::vector<std::string> class_names;  // sorted; label == index
  std::vector<Sample> train;             // max(shots) per class, class-major
  std::vector<Sample> test;
  descriptions::EmbeddingStore store;    // ground-truth descriptors + anchors
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

// First `shots` train-tagged samples of every class, in file order.
std::vector<const Sample*> subset_per_class(std::span<const Sample> samples, int shots,
                                            int class_count);

double cosine_annealing_lr(int t, int t_max, double lr0);
int epochs_for_shots(int shots);  // 1->50, 2->100, 4->100, 8->200, 16->200

struct TrainConfig {
  double lr0 = 0.002;
  int epochs = 0;  // 0 -> epochs_for_shots(shots)
  int shots = 16;
  int prompt_count = 4;  // M
  int batch_size = 32;
  double beta = 0.2;
  double tau = 0.01;
  double attention_tau = 1.0;
  alignment::DistillMode distill = alignment::DistillMode::Cosine;
  alignment::AlignmentMode align = alignment::AlignmentMode::Graph;
  transport::SinkhornConfig sinkhorn;
  std::uint64_t seed = 0;

  int resolved_epochs() const { return epochs > 0 ? epochs : epochs_for_shots(shots); }
  alignment::AlignmentConfig alignment_config() const;
  void validate() const;
  nlohmann::json to_json() const;
};

struct TrainResult {
  alignment::ContextBank bank;
  std::vector<alignment::LossBreakdown> history;  // one entry per epoch
};

// SGD over the shared context with cosine-annealed lr and a seeded shuffle.
// Refuses test-tagged samples.
TrainResult train(std::span<const Sample* const> train_samples,
                  const descriptions::EmbeddingStore& store,
                  const std::vector<std::string>& class_names, const TrainConfig& cfg);

struct EvalReport {
  std::string kind;  // "fewshot" | "base_to_new"
  double accuracy = 0.0;
  double base_acc = 0.0, new_acc = 0.0, h_mean = 0.0;
  nlohmann::json config;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;  // excluded from determinism comparisons

  nlohmann::json to_json() const;
};

EvalReport evaluate_fewshot(const alignment::ContextBank& bank, std::span<const Sample> test,
                            const TrainConfig& cfg);

// First ceil(K/2) names (sorted) are base, the rest are new.
std::pair<std::vector<std::string>, std::vector<std::string>> base_to_new_split(
    std::vector<std::string> classes);

// Prompts for the held-out classes are composed from the same trained context
// with the new anchors; nothing else is consulted at evaluation time.
EvalReport evaluate_base_to_new(const Matrix& trained_s, const SyntheticData& data,
                                const std::vector<std::string>& base_names,
                                const std::vector<std::string>& new_names,
                                const TrainConfig& cfg);

double harmonic_mean(double base, double new_value);

struct AblationGrid {
  std::vector<alignment::DistillMode> distill = {alignment::DistillMode::Cosine};
  std::vector<alignment::AlignmentMode> align = {alignment::AlignmentMode::Graph};
  std::vector<double> alphas = {0.2};
  std::vector<double> betas = {0.2};
  std::vector<int> prompt_counts = {4};
  std::vector<int> shots = {16};
};

struct AblationRow {
  std::string distill;
  std::string align;
  double alpha = 0.0;
  double beta = 0.0;
  int prompt_count = 0;
  int shots = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

// Cells run with shared seeds in fixed grid order.
std::vector<AblationRow> ablate(const SyntheticData& data, const AblationGrid& grid,
                                const TrainConfig& base_cfg);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Dataset file: JSON lines, {"label", "tokens", "global", "split"}.
void save_dataset_jsonl(const std::filesystem::path& path, std::span<const Sample> train,
                        std::span<const Sample> test);
struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
Dataset load_dataset_jsonl(const std::filesystem::path& path);

}  // namespace dualpt::harness

#endif  // DUALPT_HARNESS_HPP
