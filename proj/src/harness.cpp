#include "dualpt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dualpt/numerics.hpp"
#include "dualpt/parallel.hpp"
#include "dualpt/rng.hpp"

namespace dualpt::harness {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> unit_normal(std::size_t dim, rng::Generator& g) {
  return numerics::l2_normalize(rng::normal_vector(dim, g));
}

// Draws are unconditional so the stream layout does not depend on the noise
// level; sigma == 0 copies the prototype bit-for-bit.
std::vector<double> noisy_unit(std::span<const double> proto, double sigma, rng::Generator& g) {
  const std::vector<double> noise = rng::normal_vector(proto.size(), g);
  if (sigma == 0.0) return {proto.begin(), proto.end()};
  std::vector<double> v(proto.size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = proto[t] + sigma * noise[t];
  return numerics::l2_normalize(v);
}

Sample make_sample(const std::vector<std::vector<double>>& pool, int label, Split split,
                   const SyntheticConfig& cfg, rng::Generator& g) {
  Sample s;
  s.label = label;
  s.split = split;
  const std::size_t n = static_cast<std::size_t>(cfg.tokens_per_sample);
  const std::size_t d = static_cast<std::size_t>(cfg.dim);
  s.tokens = Matrix(n, d);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> tok = noisy_unit(pool[i % pool.size()], cfg.noise_sigma, g);
    for (std::size_t t = 0; t < d; ++t) {
      s.tokens(i, t) = tok[t];
      mean[t] += tok[t];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : mean) v *= inv;
  s.global = numerics::l2_normalize(mean);
  return s;
}

Matrix anchors_for(const descriptions::EmbeddingStore& store,
                   const std::vector<std::string>& class_names) {
  if (class_names.empty()) throw InvalidConfig("no classes");
  Matrix anchors(class_names.size(), store.dim);
  for (std::size_t k = 0; k < class_names.size(); ++k) {
    const auto it = store.classes.find(class_names[k]);
    if (it == store.classes.end())
      throw MissingDescriptors("store has no entry for class '" + class_names[k] + "'");
    if (it->second.anchor.size() != store.dim)
      throw MissingDescriptors("store has no anchor for class '" + class_names[k] + "'");
    for (std::size_t t = 0; t < store.dim; ++t) anchors(k, t) = it->second.anchor[t];
  }
  return anchors;
}

alignment::ClassDescriptors descriptors_for(const descriptions::EmbeddingStore& store,
                                            const std::vector<std::string>& class_names) {
  alignment::ClassDescriptors desc;
  desc.blocks.reserve(class_names.size());
  for (const std::string& name : class_names) {
    const auto it = store.classes.find(name);
    if (it == store.classes.end())
      throw MissingDescriptors("store has no entry for class '" + name + "'");
    desc.blocks.push_back(it->second.descriptors);
  }
  return desc;
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (classes < 1 || parts_per_class < 1 || dim < 2 || test_per_class < 1)
    throw InvalidConfig("synthetic config: sizes must be positive (dim >= 2)");
  if (tokens_per_sample < parts_per_class)
    throw InvalidConfig("synthetic config: tokens_per_sample must be >= parts_per_class");
  if (background_parts < 0) throw InvalidConfig("synthetic config: background_parts < 0");
  if (noise_sigma < 0.0 || descriptor_noise < 0.0 || anchor_bias < 0.0)
    throw InvalidConfig("synthetic config: noise must be >= 0");
  if (shots_train.empty()) throw InvalidConfig("synthetic config: shots_train is empty");
  for (int s : shots_train)
    if (s < 1) throw InvalidConfig("synthetic config: shots must be >= 1");
}

json SyntheticConfig::to_json() const {
  return json{{"classes", classes},
              {"parts_per_class", parts_per_class},
              {"tokens_per_sample", tokens_per_sample},
              {"dim", dim},
              {"noise_sigma", noise_sigma},
              {"descriptor_noise", descriptor_noise},
              {"anchor_bias", anchor_bias},
              {"shots_train", shots_train},
              {"test_per_class", test_per_class},
              {"background_parts", background_parts},
              {"seed", seed}};
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::size_t kk = static_cast<std::size_t>(config.classes);
  const std::size_t pp = static_cast<std::size_t>(config.parts_per_class);
  const std::size_t d = static_cast<std::size_t>(config.dim);

  SyntheticData data;
  int width = 2;
  for (int v = config.classes - 1; v >= 100; v /= 10) ++width;
  for (std::size_t k = 0; k < kk; ++k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "class_%0*d", width, static_cast<int>(k));
    data.class_names.emplace_back(buf);
  }

  rng::Generator g(config.seed);

  const std::vector<double> bias_direction = unit_normal(d, g);

  std::vector<std::vector<double>> background(static_cast<std::size_t>(config.background_parts));
  for (auto& b : background) b = unit_normal(d, g);

  // Classes come in sibling pairs: both share a family direction and are
  // separated mostly along the bias axis (alternating sign) plus a small
  // residual. The anchor corruption below pushes every anchor the same way
  // along that axis, which scrambles sibling rankings until the trained
  // context cancels it; descriptor centroids are bias-free and teach the
  // same correction. Parts are core plus per-part variation.
  constexpr double kCoreLean = 0.6;
  constexpr double kSiblingSep = 0.5;
  constexpr double kPartSpread = 0.7;
  std::vector<std::vector<std::vector<double>>> parts(kk);
  std::vector<double> family;
  for (std::size_t k = 0; k < kk; ++k) {
    if (k % 2 == 0) family = unit_normal(d, g);
    const std::vector<double> residual = unit_normal(d, g);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    std::vector<double> core(d);
    for (std::size_t t = 0; t < d; ++t)
      core[t] = family[t] + kSiblingSep * residual[t] + sign * kCoreLean * bias_direction[t];
    core = numerics::l2_normalize(core);
    parts[k].resize(pp);
    for (std::size_t p = 0; p < pp; ++p) {
      const std::vector<double> variation = rng::normal_vector(d, g);
      std::vector<double> part(d);
      for (std::size_t t = 0; t < d; ++t) part[t] = core[t] + kPartSpread * variation[t];
      parts[k][p] = numerics::l2_normalize(part);
    }
  }

  data.store.dim = d;
  for (std::size_t k = 0; k < kk; ++k) {
    descriptions::ClassEmbedding ce;
    std::vector<double> mean(d, 0.0);
    for (const auto& p : parts[k])
      for (std::size_t t = 0; t < d; ++t) mean[t] += p[t];
    const double inv_parts = 1.0 / static_cast<double>(pp);
    for (std::size_t t = 0; t < d; ++t)
      mean[t] = mean[t] * inv_parts + config.anchor_bias * bias_direction[t];
    ce.anchor = numerics::l2_normalize(mean);
    ce.descriptors = Matrix(pp, d);
    for (std::size_t p = 0; p < pp; ++p) {
      const std::vector<double> h = noisy_unit(parts[k][p], config.descriptor_noise, g);
      for (std::size_t t = 0; t < d; ++t) ce.descriptors(p, t) = h[t];
    }
    data.store.classes[data.class_names[k]] = std::move(ce);
  }

  std::vector<std::vector<std::vector<double>>> pools(kk);
  for (std::size_t k = 0; k < kk; ++k) {
    pools[k] = parts[k];
    pools[k].insert(pools[k].end(), background.begin(), background.end());
  }

  const int max_shots = *std::max_element(config.shots_train.begin(), config.shots_train.end());
  for (std::size_t k = 0; k < kk; ++k)
    for (int s = 0; s < max_shots; ++s)
      data.train.push_back(make_sample(pools[k], static_cast<int>(k), Split::Train, config, g));
  for (std::size_t k = 0; k < kk; ++k)
    for (int s = 0; s < config.test_per_class; ++s)
      data.test.push_back(make_sample(pools[k], static_cast<int>(k), Split::Test, config, g));
  return data;
}

std::vector<const Sample*> subset_per_class(std::span<const Sample> samples, int shots,
                                            int class_count) {
  if (shots < 1 || class_count < 1) throw InvalidConfig("subset: shots and classes must be >= 1");
  std::vector<int> taken(static_cast<std::size_t>(class_count), 0);
  std::vector<const Sample*> out;
  for (const Sample& s : samples) {
    if (s.split != Split::Train) continue;
    if (s.label < 0 || s.label >= class_count) throw InvalidLabel("sample label out of range");
    if (taken[static_cast<std::size_t>(s.label)] < shots) {
      ++taken[static_cast<std::size_t>(s.label)];
      out.push_back(&s);
    }
  }
  for (int k = 0; k < class_count; ++k)
    if (taken[static_cast<std::size_t>(k)] != shots)
      throw InvalidConfig("not enough train samples for class " + std::to_string(k));
  return out;
}

double cosine_annealing_lr(int t, int t_max, double lr0) {
  if (t_max < 1) throw InvalidConfig("cosine_annealing_lr: t_max must be >= 1");
  if (!(lr0 > 0.0)) throw InvalidConfig("cosine_annealing_lr: lr0 must be > 0");
  if (t < 0 || t > t_max) throw InvalidEpoch("cosine_annealing_lr: t outside [0, t_max]");
  return lr0 * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(t) / static_cast<double>(t_max)));
}

int epochs_for_shots(int shots) {
  if (shots < 1) throw InvalidConfig("epochs_for_shots: shots must be >= 1");
  if (shots == 1) return 50;
  if (shots <= 4) return 100;
  return 200;
}

alignment::AlignmentConfig TrainConfig::alignment_config() const {
  alignment::AlignmentConfig a;
  a.sinkhorn = sinkhorn;
  a.align = align;
  a.distill = distill;
  a.beta = beta;
  a.tau = tau;
  a.attention_tau = attention_tau;
  return a;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw InvalidConfig("train config: lr0 must be > 0");
  if (resolved_epochs() < 1) throw InvalidConfig("train config: epochs must be >= 1");
  if (shots < 1) throw InvalidConfig("train config: shots must be >= 1");
  if (prompt_count < 1) throw InvalidConfig("train config: prompt_count must be >= 1");
  if (batch_size < 1) throw InvalidConfig("train config: batch_size must be >= 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidWeight("train config: beta outside [0, 1]");
  if (!(tau > 0.0) || !(attention_tau > 0.0))
    throw InvalidTemperature("train config: temperatures must be > 0");
  sinkhorn.validate();
}

json TrainConfig::to_json() const {
  return json{{"lr0", lr0},
              {"epochs", resolved_epochs()},
              {"shots", shots},
              {"prompt_count", prompt_count},
              {"batch_size", batch_size},
              {"beta", beta},
              {"tau", tau},
              {"attention_tau", attention_tau},
              {"distill", alignment::to_string(distill)},
              {"align", alignment::to_string(align)},
              {"sinkhorn",
               {{"lambda", sinkhorn.lambda},
                {"alpha", sinkhorn.alpha},
                {"inner_max", sinkhorn.inner_max},
                {"outer_max", sinkhorn.outer_max},
                {"marginal_tol", sinkhorn.marginal_tol},
                {"plan_tol", sinkhorn.plan_tol}}},
              {"seed", seed}};
}

TrainResult train(std::span<const Sample* const> train_samples,
                  const descriptions::EmbeddingStore& store,
                  const std::vector<std::string>& class_names, const TrainConfig& cfg) {
  cfg.validate();
  if (train_samples.empty()) throw InvalidConfig("train: empty training set");
  const int kk = static_cast<int>(class_names.size());
  for (const Sample* s : train_samples) {
    if (s->split != Split::Train)
      throw InvalidConfig("train: training set contains test-split samples");
    if (s->label < 0 || s->label >= kk) throw InvalidLabel("train: label out of range");
  }

  const std::size_t d = store.dim;
  alignment::ContextBank bank;
  bank.anchors = anchors_for(store, class_names);
  bank.s = Matrix(static_cast<std::size_t>(cfg.prompt_count), d);
  rng::Generator init_rng(cfg.seed);
  for (std::size_t m = 0; m < bank.s.rows(); ++m)
    for (std::size_t t = 0; t < d; ++t) bank.s(m, t) = 0.02 * init_rng.normal();

  alignment::ClassDescriptors desc;
  if (cfg.distill != alignment::DistillMode::None) desc = descriptors_for(store, class_names);

  // cos(Z, Z) is S-independent; build it once per sample
  std::vector<Matrix> cz(train_samples.size());
  parallel::for_each(train_samples.size(),
                     [&](std::size_t i) { cz[i] = alignment::token_graph(train_samples[i]->tokens); });

  const alignment::AlignmentConfig acfg = cfg.alignment_config();
  const int epochs = cfg.resolved_epochs();
  const std::size_t n = train_samples.size();

  rng::Generator shuffle_rng(rng::fnv1a64("epoch-shuffle", cfg.seed));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(epochs));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cosine_annealing_lr(epoch, epochs, cfg.lr0);
    shuffle_rng.shuffle(order);

    double sum_llm = 0.0, sum_img = 0.0, sum_total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<alignment::BatchInstance> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const Sample* s = train_samples[order[i]];
        batch.push_back({&s->tokens, s->global, s->label, &cz[order[i]]});
      }
      alignment::LossBreakdown bd;
      const Matrix grad = alignment::loss_gradient(batch, bank, desc, acfg, &bd);
      for (std::size_t m = 0; m < bank.s.rows(); ++m)
        for (std::size_t t = 0; t < d; ++t) bank.s(m, t) -= lr * grad(m, t);
      const double w = static_cast<double>(stop - start);
      sum_llm += bd.l_llm * w;
      sum_img += bd.l_img * w;
      sum_total += bd.total * w;
    }
    alignment::LossBreakdown epoch_bd;
    epoch_bd.beta = cfg.beta;
    epoch_bd.l_llm = sum_llm / static_cast<double>(n);
    epoch_bd.l_img = sum_img / static_cast<double>(n);
    epoch_bd.total = sum_total / static_cast<double>(n);
    if (!std::isfinite(epoch_bd.total)) throw NonFiniteValue("train: loss diverged");
    result.history.push_back(epoch_bd);
  }
  result.bank = std::move(bank);
  return result;
}

json EvalReport::to_json() const {
  json j;
  j["kind"] = kind;
  if (kind == "base_to_new") {
    j["base_acc"] = base_acc;
    j["new_acc"] = new_acc;
    j["h_mean"] = h_mean;
  } else {
    j["accuracy"] = accuracy;
  }
  j["config"] = config;
  j["seed"] = seed;
  j["timing"] = json{{"wall_ms", wall_ms}};
  return j;
}

namespace {

double accuracy_percent(const alignment::ContextBank& bank, std::span<const Sample> samples,
                        std::span<const int> labels, const TrainConfig& cfg) {
  std::vector<std::size_t> predicted(samples.size());
  parallel::for_each(samples.size(), [&](std::size_t i) {
    const ProbVector probs =
        alignment::ot_predict(samples[i].tokens, bank, cfg.sinkhorn,
                              cfg.align, cfg.tau, cfg.attention_tau);
    predicted[i] = numerics::argmax(probs.weights());
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (predicted[i] == static_cast<std::size_t>(labels[i])) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

EvalReport evaluate_fewshot(const alignment::ContextBank& bank, std::span<const Sample> test,
                            const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (test.empty()) throw InvalidConfig("evaluate: empty test set");
  const int kk = static_cast<int>(bank.class_count());
  std::vector<int> labels;
  labels.reserve(test.size());
  for (const Sample& s : test) {
    if (s.tokens.cols() != bank.dim()) throw ShapeMismatch("evaluate: sample dim != bank dim");
    if (s.label < 0 || s.label >= kk) throw InvalidLabel("evaluate: label out of range");
    labels.push_back(s.label);
  }
  EvalReport report;
  report.kind = "fewshot";
  report.accuracy = accuracy_percent(bank, test, labels, cfg);
  report.config = cfg.to_json();
  report.seed = cfg.seed;
  report.wall_ms = wall_ms_since(t0);
  return report;
}

std::pair<std::vector<std::string>, std::vector<std::string>> base_to_new_split(
    std::vector<std::string> classes) {
  if (classes.size() < 2) throw InvalidConfig("base_to_new_split: need at least 2 classes");
  std::sort(classes.begin(), classes.end());
  const std::size_t base_count = (classes.size() + 1) / 2;
  std::vector<std::string> base(classes.begin(), classes.begin() + base_count);
  std::vector<std::string> new_names(classes.begin() + base_count, classes.end());
  return {std::move(base), std::move(new_names)};
}

EvalReport evaluate_base_to_new(const Matrix& trained_s, const SyntheticData& data,
                                const std::vector<std::string>& base_names,
                                const std::vector<std::string>& new_names,
                                const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto side_accuracy = [&](const std::vector<std::string>& names) {
    alignment::ContextBank bank;
    bank.s = trained_s;
    bank.anchors = anchors_for(data.store, names);
    std::vector<Sample> subset;
    std::vector<int> labels;
    for (const Sample& s : data.test) {
      const std::string& cls = data.class_names.at(static_cast<std::size_t>(s.label));
      const auto it = std::find(names.begin(), names.end(), cls);
      if (it == names.end()) continue;
      subset.push_back(s);
      labels.push_back(static_cast<int>(it - names.begin()));
    }
    if (subset.empty()) throw InvalidConfig("base_to_new: a side has no test samples");
    return accuracy_percent(bank, subset, labels, cfg);
  };

  EvalReport report;
  report.kind = "base_to_new";
  report.base_acc = side_accuracy(base_names);
  report.new_acc = side_accuracy(new_names);
  report.h_mean = harmonic_mean(report.base_acc, report.new_acc);
  report.config = cfg.to_json();
  report.seed = cfg.seed;
  report.wall_ms = wall_ms_since(t0);
  return report;
}

double harmonic_mean(double base, double new_value) {
  if (base < 0.0 || new_value < 0.0) throw InvalidConfig("harmonic_mean: negative input");
  if (base == 0.0 && new_value == 0.0) throw DegenerateMetric("harmonic_mean of (0, 0)");
  return 2.0 * base * new_value / (base + new_value);
}

std::vector<AblationRow> ablate(const SyntheticData& data, const AblationGrid& grid,
                                const TrainConfig& base_cfg) {
  if (grid.distill.empty() || grid.align.empty() || grid.alphas.empty() || grid.betas.empty() ||
      grid.prompt_counts.empty() || grid.shots.empty())
    throw InvalidConfig("ablate: empty grid axis");
  std::vector<AblationRow> rows;
  for (const auto distill : grid.distill)
    for (const auto align : grid.align)
      for (const double alpha : grid.alphas)
        for (const double beta : grid.betas)
          for (const int m : grid.prompt_counts)
            for (const int shots : grid.shots) {
              TrainConfig cfg = base_cfg;
              cfg.distill = distill;
              cfg.align = align;
              cfg.sinkhorn.alpha = alpha;
              cfg.beta = beta;
              cfg.prompt_count = m;
              cfg.shots = shots;
              const auto subset = subset_per_class(data.train, shots,
                                                   static_cast<int>(data.class_names.size()));
              const TrainResult tr = train(subset, data.store, data.class_names, cfg);
              const EvalReport rep = evaluate_fewshot(tr.bank, data.test, cfg);
              rows.push_back({alignment::to_string(distill), alignment::to_string(align), alpha,
                              beta, m, shots, cfg.seed, rep.accuracy});
            }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "distill,align,alpha,beta,M,shots,seed,accuracy\n";
  for (const AblationRow& r : rows) {
    out += r.distill + "," + r.align + "," + format_double("%.3f", r.alpha) + "," +
           format_double("%.3f", r.beta) + "," + std::to_string(r.prompt_count) + "," +
           std::to_string(r.shots) + "," + std::to_string(r.seed) + "," +
           format_double("%.4f", r.accuracy) + "\n";
  }
  return out;
}

void save_dataset_jsonl(const std::filesystem::path& path, std::span<const Sample> train,
                        std::span<const Sample> test) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  const auto write_sample = [&out](const Sample& s) {
    json j;
    j["label"] = s.label;
    json tokens = json::array();
    for (std::size_t i = 0; i < s.tokens.rows(); ++i) {
      json row = json::array();
      for (std::size_t t = 0; t < s.tokens.cols(); ++t) row.push_back(s.tokens(i, t));
      tokens.push_back(std::move(row));
    }
    j["tokens"] = std::move(tokens);
    j["global"] = s.global;
    j["split"] = s.split == Split::Train ? "train" : "test";
    out << j.dump() << "\n";
  };
  for (const Sample& s : train) write_sample(s);
  for (const Sample& s : test) write_sample(s);
  if (!out.flush()) throw Error("write failed: " + path.string());
}

Dataset load_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw SchemaError("dataset line " + std::to_string(line_no) + " is not valid JSON");
    }
    const std::string where = "line " + std::to_string(line_no);
    if (!j.contains("label") || !j["label"].is_number_integer())
      throw SchemaError(where + ": missing or wrong type at /label");
    if (!j.contains("tokens") || !j["tokens"].is_array() || j["tokens"].empty())
      throw SchemaError(where + ": missing or wrong type at /tokens");
    if (!j.contains("global") || !j["global"].is_array())
      throw SchemaError(where + ": missing or wrong type at /global");
    if (!j.contains("split") || !j["split"].is_string())
      throw SchemaError(where + ": missing or wrong type at /split");

    Sample s;
    s.label = j["label"].get<int>();
    const json& tokens = j["tokens"];
    const std::size_t d = tokens[0].is_array() ? tokens[0].size() : 0;
    if (d == 0) throw SchemaError(where + ": bad row at /tokens/0");
    s.tokens = Matrix(tokens.size(), d);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!tokens[i].is_array() || tokens[i].size() != d)
        throw SchemaError(where + ": bad row at /tokens/" + std::to_string(i));
      for (std::size_t t = 0; t < d; ++t) s.tokens(i, t) = tokens[i][t].get<double>();
    }
    s.global = j["global"].get<std::vector<double>>();
    if (s.global.size() != d) throw SchemaError(where + ": /global length != token dim");
    const std::string split = j["split"].get<std::string>();
    if (split == "train") {
      s.split = Split::Train;
      data.train.push_back(std::move(s));
    } else if (split == "test") {
      s.split = Split::Test;
      data.test.push_back(std::move(s));
    } else {
      throw SchemaError(where + ": /split must be \"train\" or \"test\"");
    }
  }
  return data;
}

}  // namespace dualpt::harness
