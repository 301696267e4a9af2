// Command-line front door: synthetic data, description fetching/embedding,
// training, evaluation, ablation grids and a transport debug solver.
//
// Exit codes: 0 success, 2 usage/schema error, 3 external-service error,
// 4 numerical failure (non-finite loss).

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dualpt/alignment.hpp"
#include "dualpt/descriptions.hpp"
#include "dualpt/harness.hpp"
#include "dualpt/parallel.hpp"
#include "dualpt/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exclusive lock on an output directory; released on scope exit.
class OutDirLock {
 public:
  explicit OutDirLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / ".dualpt.lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw dualpt::LockError("output directory is locked (remove " + path_.string() +
                              " if no run is active)");
    ::close(fd);
  }
  ~OutDirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  fs::path path_;
};

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dualpt::Error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out.flush()) throw dualpt::Error("write failed: " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dualpt::Error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw dualpt::SchemaError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Every command records its resolved configuration before any long
// computation; re-running from the manifest reproduces the run.
void write_manifest(const fs::path& path, const std::string& command, const json& config,
                    const json& inputs, const json& outputs, std::uint64_t seed) {
  write_json_file(path, json{{"tool", "dualpt"},
                             {"version", kVersion},
                             {"command", command},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", outputs},
                             {"seed", seed}});
}

std::vector<std::string> read_class_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw dualpt::Error("cannot open: " + path.string());
  std::vector<std::string> classes;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && (line[b] == ' ' || line[b] == '\t')) ++b;
    if (b < line.size()) classes.push_back(line.substr(b));
  }
  if (classes.empty()) throw dualpt::SchemaError("no classes in " + path.string());
  return classes;
}

dualpt::Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    throw dualpt::SchemaError("expected a matrix at " + where);
  const std::size_t cols = j[0].size();
  dualpt::Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw dualpt::SchemaError("bad row at " + where + "/" + std::to_string(i));
    for (std::size_t t = 0; t < cols; ++t) {
      if (!j[i][t].is_number())
        throw dualpt::SchemaError("bad value at " + where + "/" + std::to_string(i) + "/" +
                                  std::to_string(t));
      m(i, t) = j[i][t].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const dualpt::Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> sorted_class_names(const dualpt::descriptions::EmbeddingStore& store) {
  std::vector<std::string> names;
  for (const auto& [name, entry] : store.classes) names.push_back(name);
  if (names.empty()) throw dualpt::SchemaError("embedding store has no classes");
  return names;  // std::map iterates sorted
}

// ---- train/eval option bundle -------------------------------------------

struct TrainFlags {
  dualpt::harness::TrainConfig cfg;
  std::string distill = "cosine";
  std::string align = "graph";

  void attach(CLI::App* cmd) {
    cmd->add_option("--shots", cfg.shots, "train shots per class")->capture_default_str();
    cmd->add_option("--m", cfg.prompt_count, "prompts per class")->capture_default_str();
    cmd->add_option("--alpha", cfg.sinkhorn.alpha, "fused weight on the structural cost")
        ->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "weight of the distillation loss")->capture_default_str();
    cmd->add_option("--lr", cfg.lr0, "initial SGD learning rate")->capture_default_str();
    cmd->add_option("--tau", cfg.tau, "logit temperature")->capture_default_str();
    cmd->add_option("--attention-tau", cfg.attention_tau, "attention softmax temperature")
        ->capture_default_str();
    cmd->add_option("--lambda", cfg.sinkhorn.lambda, "entropic regularization")
        ->capture_default_str();
    cmd->add_option("--epochs", cfg.epochs, "epochs (0 = per-shot schedule)")
        ->capture_default_str();
    cmd->add_option("--batch-size", cfg.batch_size, "minibatch size")->capture_default_str();
    cmd->add_option("--inner-max", cfg.sinkhorn.inner_max, "max Sinkhorn sweeps")
        ->capture_default_str();
    cmd->add_option("--outer-max", cfg.sinkhorn.outer_max, "max fused rounds")
        ->capture_default_str();
    cmd->add_option("--marginal-tol", cfg.sinkhorn.marginal_tol, "marginal tolerance")
        ->capture_default_str();
    cmd->add_option("--plan-tol", cfg.sinkhorn.plan_tol, "outer plan tolerance")
        ->capture_default_str();
    cmd->add_option("--distill", distill, "distill mode: cosine|wd|ce|none")
        ->capture_default_str();
    cmd->add_option("--align", align, "alignment mode: graph|node|edge|attn")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
  }

  dualpt::harness::TrainConfig resolve(const CLI::App* cmd) const {
    dualpt::harness::TrainConfig out = cfg;
    out.distill = dualpt::alignment::distill_mode_from(distill);
    out.align = dualpt::alignment::alignment_mode_from(align);
    if ((out.align == dualpt::alignment::AlignmentMode::Node ||
         out.align == dualpt::alignment::AlignmentMode::Edge) &&
        cmd->count("--alpha") > 0)
      std::cerr << "warning: --align " << align << " ignores --alpha (" << cfg.sinkhorn.alpha
                << ")\n";
    return out;
  }
};

json bank_to_json(const dualpt::alignment::ContextBank& bank,
                  const std::vector<std::string>& class_names, const json& config) {
  return json{{"dim", bank.dim()},
              {"prompt_count", bank.prompt_count()},
              {"s", matrix_to_json(bank.s)},
              {"anchors", matrix_to_json(bank.anchors)},
              {"class_names", class_names},
              {"config", config}};
}

struct LoadedBank {
  dualpt::alignment::ContextBank bank;
  std::vector<std::string> class_names;
  dualpt::harness::TrainConfig cfg;
};

LoadedBank bank_from_json(const json& j) {
  for (const char* key : {"s", "anchors", "class_names", "config"})
    if (!j.contains(key)) throw dualpt::SchemaError(std::string("missing field at /") + key);
  LoadedBank out;
  out.bank.s = matrix_from_json(j["s"], "/s");
  out.bank.anchors = matrix_from_json(j["anchors"], "/anchors");
  out.class_names = j["class_names"].get<std::vector<std::string>>();
  const json& c = j["config"];
  const auto need = [&](const char* key) -> const json& {
    if (!c.contains(key)) throw dualpt::SchemaError(std::string("missing field at /config/") + key);
    return c[key];
  };
  out.cfg.lr0 = need("lr0").get<double>();
  out.cfg.epochs = need("epochs").get<int>();
  out.cfg.shots = need("shots").get<int>();
  out.cfg.prompt_count = need("prompt_count").get<int>();
  out.cfg.batch_size = need("batch_size").get<int>();
  out.cfg.beta = need("beta").get<double>();
  out.cfg.tau = need("tau").get<double>();
  out.cfg.attention_tau = need("attention_tau").get<double>();
  out.cfg.distill = dualpt::alignment::distill_mode_from(need("distill").get<std::string>());
  out.cfg.align = dualpt::alignment::alignment_mode_from(need("align").get<std::string>());
  const json& sk = need("sinkhorn");
  out.cfg.sinkhorn.lambda = sk.at("lambda").get<double>();
  out.cfg.sinkhorn.alpha = sk.at("alpha").get<double>();
  out.cfg.sinkhorn.inner_max = sk.at("inner_max").get<int>();
  out.cfg.sinkhorn.outer_max = sk.at("outer_max").get<int>();
  out.cfg.sinkhorn.marginal_tol = sk.at("marginal_tol").get<double>();
  out.cfg.sinkhorn.plan_tol = sk.at("plan_tol").get<double>();
  out.cfg.seed = need("seed").get<std::uint64_t>();
  return out;
}

json plan_to_json(const dualpt::transport::TransportPlan& plan, const dualpt::Matrix& cost) {
  double row_err = 0.0, col_err = 0.0;
  for (std::size_t i = 0; i < plan.t.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < plan.t.cols(); ++j) s += plan.t(i, j);
    row_err = std::max(row_err, std::fabs(s - plan.p[i]));
  }
  for (std::size_t j = 0; j < plan.t.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < plan.t.rows(); ++i) s += plan.t(i, j);
    col_err = std::max(col_err, std::fabs(s - plan.q[j]));
  }
  return json{{"plan", matrix_to_json(plan.t)},
              {"objective", plan.objective(cost)},
              {"row_marginal_error", row_err},
              {"col_marginal_error", col_err},
              {"inner_iterations", plan.inner_iterations},
              {"outer_iterations", plan.outer_iterations},
              {"converged", plan.converged}};
}

// ---- subcommand bodies ----------------------------------------------------

int run_gen_queries(const fs::path& classes_path, const fs::path& out) {
  const std::vector<std::string> classes = read_class_list(classes_path);
  write_manifest(out.string() + ".manifest.json", "gen-queries", json::object(),
                 json{{"classes", classes_path.string()}}, json{{"queries", out.string()}}, 0);
  json records = json::array();
  for (const std::string& name : classes)
    records.push_back(json{{"class_name", name}, {"query", dualpt::descriptions::build_query(name)}});
  write_json_file(out, records);
  std::cout << "wrote " << classes.size() << " queries to " << out.string() << "\n";
  return 0;
}

int run_fetch(const fs::path& classes_path, const fs::path& cache_path, bool mock,
              const std::string& fixtures, const dualpt::descriptions::ClientConfig& ccfg) {
  const std::vector<std::string> classes = read_class_list(classes_path);
  std::size_t cached_before = 0;
  if (fs::exists(cache_path)) {
    const auto cache = dualpt::descriptions::DescriptionCache::load(cache_path);
    for (const std::string& c : classes) cached_before += cache.contains(c) ? 1 : 0;
  }
  write_manifest(cache_path.string() + ".manifest.json", "fetch",
                 json{{"model", ccfg.model},
                      {"temperature", ccfg.temperature},
                      {"endpoint", ccfg.endpoint},
                      {"mock", mock}},
                 json{{"classes", classes_path.string()}}, json{{"cache", cache_path.string()}}, 0);

  dualpt::descriptions::CacheMeta meta;
  meta.model = mock ? "mock" : ccfg.model;
  meta.temperature = ccfg.temperature;

  if (mock) {
    if (fixtures.empty()) {
      dualpt::descriptions::MockChatClient client;
      dualpt::descriptions::fetch_descriptions(classes, client, meta, cache_path);
    } else {
      const json fj = read_json_file(fixtures);
      std::map<std::string, std::vector<std::string>> canned;
      for (const auto& [name, phrases] : fj.items()) {
        if (!phrases.is_array()) throw dualpt::SchemaError("wrong type at /" + name);
        canned[name] = phrases.get<std::vector<std::string>>();
      }
      dualpt::descriptions::MockChatClient client(std::move(canned));
      dualpt::descriptions::fetch_descriptions(classes, client, meta, cache_path);
    }
  } else {
    if (ccfg.endpoint.empty()) throw dualpt::InvalidConfig("--endpoint is required without --mock");
    if (const char* tok = std::getenv(ccfg.token_env.c_str()); tok == nullptr || *tok == '\0')
      throw dualpt::InvalidConfig("set " + ccfg.token_env + " or pass --mock");
    dualpt::descriptions::fetch_descriptions(classes, ccfg, cache_path);
  }
  std::cout << (classes.size() - cached_before) << " fetched, " << cached_before << " cached\n";
  return 0;
}

int run_embed(const fs::path& cache_path, const fs::path& out, int dim, std::uint64_t seed) {
  const auto cache = dualpt::descriptions::DescriptionCache::load(cache_path);
  write_manifest(out.string() + ".manifest.json", "embed", json{{"dim", dim}, {"seed", seed}},
                 json{{"cache", cache_path.string()}}, json{{"store", out.string()}}, seed);
  const auto store = dualpt::descriptions::embed_descriptions(
      cache,
      [dim, seed](const std::string& text) {
        return dualpt::descriptions::mock_encode(text, static_cast<std::size_t>(dim), seed);
      },
      static_cast<std::size_t>(dim));
  store.save(out);
  std::cout << "embedded " << store.classes.size() << " classes into " << out.string() << "\n";
  return 0;
}

int run_synth(const fs::path& out_dir, const dualpt::harness::SyntheticConfig& cfg) {
  OutDirLock lock(out_dir);
  write_manifest(out_dir / "manifest-synth.json", "synth", cfg.to_json(), json::object(),
                 json{{"dataset", (out_dir / "dataset.jsonl").string()},
                      {"store", (out_dir / "store.json").string()}},
                 cfg.seed);
  const auto data = dualpt::harness::generate_synthetic(cfg);
  dualpt::harness::save_dataset_jsonl(out_dir / "dataset.jsonl", data.train, data.test);
  data.store.save(out_dir / "store.json");
  std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
            << " test samples for " << data.class_names.size() << " classes to "
            << out_dir.string() << "\n";
  return 0;
}

int run_train(const fs::path& dataset_path, const fs::path& store_path, const fs::path& out_dir,
              const dualpt::harness::TrainConfig& cfg) {
  OutDirLock lock(out_dir);
  write_manifest(out_dir / "manifest-train.json", "train", cfg.to_json(),
                 json{{"dataset", dataset_path.string()}, {"store", store_path.string()}},
                 json{{"bank", (out_dir / "bank.json").string()},
                      {"report", (out_dir / "train_report.json").string()}},
                 cfg.seed);
  const auto store = dualpt::descriptions::EmbeddingStore::load(store_path);
  const auto data = dualpt::harness::load_dataset_jsonl(dataset_path);
  const auto names = sorted_class_names(store);
  const auto subset =
      dualpt::harness::subset_per_class(data.train, cfg.shots, static_cast<int>(names.size()));
  const auto result = dualpt::harness::train(subset, store, names, cfg);

  write_json_file(out_dir / "bank.json", bank_to_json(result.bank, names, cfg.to_json()));
  json history = json::array();
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& bd = result.history[e];
    history.push_back(json{{"epoch", e},
                           {"l_llm", bd.l_llm},
                           {"l_img", bd.l_img},
                           {"total", bd.total}});
  }
  write_json_file(out_dir / "train_report.json",
                  json{{"history", history}, {"config", cfg.to_json()}, {"seed", cfg.seed}});
  std::cout << "trained " << cfg.resolved_epochs() << " epochs; final loss "
            << result.history.back().total << "; bank at " << (out_dir / "bank.json").string()
            << "\n";
  return 0;
}

int run_eval(const fs::path& dataset_path, const fs::path& bank_path, const fs::path& out) {
  const LoadedBank lb = bank_from_json(read_json_file(bank_path));
  write_manifest(out.string() + ".manifest.json", "eval", lb.cfg.to_json(),
                 json{{"dataset", dataset_path.string()}, {"bank", bank_path.string()}},
                 json{{"report", out.string()}}, lb.cfg.seed);
  const auto data = dualpt::harness::load_dataset_jsonl(dataset_path);
  const auto report = dualpt::harness::evaluate_fewshot(lb.bank, data.test, lb.cfg);
  write_json_file(out, report.to_json());
  std::cout << "accuracy " << report.accuracy << " on " << data.test.size() << " samples\n";
  return 0;
}

int run_b2n(const fs::path& dataset_path, const fs::path& store_path, const fs::path& out_dir,
            const dualpt::harness::TrainConfig& cfg) {
  OutDirLock lock(out_dir);
  write_manifest(out_dir / "manifest-b2n.json", "b2n", cfg.to_json(),
                 json{{"dataset", dataset_path.string()}, {"store", store_path.string()}},
                 json{{"report", (out_dir / "b2n_report.json").string()}}, cfg.seed);
  const auto store = dualpt::descriptions::EmbeddingStore::load(store_path);
  const auto loaded = dualpt::harness::load_dataset_jsonl(dataset_path);
  const auto names = sorted_class_names(store);
  const auto [base_names, new_names] = dualpt::harness::base_to_new_split(names);

  // train on base classes only, labels remapped to base order
  dualpt::harness::SyntheticData data;
  data.class_names = names;
  data.train = loaded.train;
  data.test = loaded.test;
  data.store = store;
  std::vector<dualpt::harness::Sample> base_train;
  for (const auto& s : loaded.train) {
    const std::string& cls = names.at(static_cast<std::size_t>(s.label));
    const auto it = std::find(base_names.begin(), base_names.end(), cls);
    if (it == base_names.end()) continue;
    base_train.push_back(s);
    base_train.back().label = static_cast<int>(it - base_names.begin());
  }
  const auto subset = dualpt::harness::subset_per_class(base_train, cfg.shots,
                                                        static_cast<int>(base_names.size()));
  const auto result = dualpt::harness::train(subset, store, base_names, cfg);
  const auto report =
      dualpt::harness::evaluate_base_to_new(result.bank.s, data, base_names, new_names, cfg);
  write_json_file(out_dir / "b2n_report.json", report.to_json());
  std::cout << "base " << report.base_acc << " new " << report.new_acc << " H " << report.h_mean
            << "\n";
  return 0;
}

int run_ablate(const fs::path& dataset_path, const fs::path& store_path, const fs::path& out_dir,
               const dualpt::harness::TrainConfig& base_cfg,
               const dualpt::harness::AblationGrid& grid) {
  OutDirLock lock(out_dir);
  json grid_json{{"alphas", grid.alphas},
                 {"betas", grid.betas},
                 {"prompt_counts", grid.prompt_counts},
                 {"shots", grid.shots}};
  write_manifest(out_dir / "manifest-ablate.json", "ablate",
                 json{{"base", base_cfg.to_json()}, {"grid", grid_json}},
                 json{{"dataset", dataset_path.string()}, {"store", store_path.string()}},
                 json{{"table", (out_dir / "ablation.csv").string()}}, base_cfg.seed);
  const auto store = dualpt::descriptions::EmbeddingStore::load(store_path);
  const auto loaded = dualpt::harness::load_dataset_jsonl(dataset_path);
  dualpt::harness::SyntheticData data;
  data.class_names = sorted_class_names(store);
  data.train = loaded.train;
  data.test = loaded.test;
  data.store = store;

  const auto rows = dualpt::harness::ablate(data, grid, base_cfg);
  const std::string csv = dualpt::harness::ablation_csv(rows);
  std::ofstream out(out_dir / "ablation.csv", std::ios::binary | std::ios::trunc);
  out << csv;
  out.flush();
  std::cout << csv;
  return 0;
}

int run_solve_ot(const fs::path& input, const fs::path& out,
                 const dualpt::transport::SinkhornConfig& cfg) {
  const json j = read_json_file(input);
  dualpt::transport::TransportPlan plan;
  dualpt::Matrix cost;
  if (j.contains("cost")) {
    cost = matrix_from_json(j["cost"], "/cost");
    const auto marginal = [&](const char* key, std::size_t n) {
      if (!j.contains(key)) return dualpt::ProbVector::uniform(n);
      const auto w = j[key].get<std::vector<double>>();
      if (w.size() != n) throw dualpt::SchemaError(std::string("wrong length at /") + key);
      return dualpt::ProbVector(w);
    };
    plan = dualpt::transport::sinkhorn(cost, marginal("p", cost.rows()),
                                       marginal("q", cost.cols()), cfg);
  } else if (j.contains("z") && j.contains("w")) {
    const dualpt::Matrix z = matrix_from_json(j["z"], "/z");
    const dualpt::Matrix w = matrix_from_json(j["w"], "/w");
    plan = dualpt::transport::solve_assignment(z, w, cfg);
    cost = dualpt::transport::wd_cost(z, w);
  } else {
    throw dualpt::SchemaError("input needs either /cost or /z and /w");
  }
  const json result = plan_to_json(plan, cost);
  std::cout << result.dump(2) << "\n";
  if (!out.empty()) write_json_file(out, result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-aligned prompt tuning: description-grounded prompt learning with "
               "fused graph-matching alignment"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware default)");

  // gen-queries
  auto* cmd_gen = app.add_subcommand("gen-queries", "render the description query per class");
  fs::path gen_classes, gen_out;
  cmd_gen->add_option("--classes", gen_classes, "class list, one name per line")->required();
  cmd_gen->add_option("--out", gen_out, "output query JSON")->required();

  // fetch
  auto* cmd_fetch = app.add_subcommand("fetch", "fetch class descriptions into the cache");
  fs::path fetch_classes, fetch_cache;
  bool fetch_mock = false;
  std::string fetch_fixtures;
  dualpt::descriptions::ClientConfig ccfg;
  cmd_fetch->add_option("--classes", fetch_classes, "class list")->required();
  cmd_fetch->add_option("--cache", fetch_cache, "description cache JSON")->required();
  cmd_fetch->add_option("--endpoint", ccfg.endpoint, "chat-completion endpoint URL");
  cmd_fetch->add_option("--model", ccfg.model, "model name")->capture_default_str();
  cmd_fetch->add_option("--temperature", ccfg.temperature, "sampling temperature")
      ->capture_default_str();
  cmd_fetch->add_option("--retries", ccfg.retries, "extra attempts on failure")
      ->capture_default_str();
  cmd_fetch->add_option("--timeout", ccfg.timeout_seconds, "request timeout seconds")
      ->capture_default_str();
  cmd_fetch->add_flag("--no-verify-tls", [&ccfg](std::int64_t) { ccfg.verify_tls = false; },
                      "skip TLS certificate verification");
  cmd_fetch->add_flag("--mock", fetch_mock, "serve canned fixtures, no network");
  cmd_fetch->add_option("--fixtures", fetch_fixtures, "JSON {class: [phrases]} for --mock");

  // embed
  auto* cmd_embed = app.add_subcommand("embed", "embed cached descriptions into a store");
  fs::path embed_cache, embed_out;
  int embed_dim = 32;
  std::uint64_t embed_seed = 0;
  cmd_embed->add_option("--cache", embed_cache, "description cache JSON")->required();
  cmd_embed->add_option("--out", embed_out, "output embedding store JSON")->required();
  cmd_embed->add_option("--dim", embed_dim, "embedding dimension")->capture_default_str();
  cmd_embed->add_option("--seed", embed_seed, "encoder seed")->capture_default_str();

  // synth
  auto* cmd_synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  fs::path synth_out_dir;
  dualpt::harness::SyntheticConfig scfg;
  cmd_synth->add_option("--out-dir", synth_out_dir, "output directory")->required();
  cmd_synth->add_option("--classes", scfg.classes, "class count")->capture_default_str();
  cmd_synth->add_option("--parts", scfg.parts_per_class, "prototypes per class")
      ->capture_default_str();
  cmd_synth->add_option("--tokens", scfg.tokens_per_sample, "tokens per sample")
      ->capture_default_str();
  cmd_synth->add_option("--dim", scfg.dim, "embedding dimension")->capture_default_str();
  cmd_synth->add_option("--noise", scfg.noise_sigma, "token noise sigma")->capture_default_str();
  cmd_synth->add_option("--descriptor-noise", scfg.descriptor_noise, "descriptor noise sigma")
      ->capture_default_str();
  cmd_synth->add_option("--anchor-bias", scfg.anchor_bias, "shared anchor corruption strength")
      ->capture_default_str();
  cmd_synth->add_option("--shots", scfg.shots_train, "shot counts to provision")
      ->capture_default_str();
  cmd_synth->add_option("--test-per-class", scfg.test_per_class, "test samples per class")
      ->capture_default_str();
  cmd_synth->add_option("--background-parts", scfg.background_parts,
                        "shared background prototypes")
      ->capture_default_str();
  cmd_synth->add_option("--seed", scfg.seed, "generation seed")->capture_default_str();

  // train
  auto* cmd_train = app.add_subcommand("train", "train the shared context on a dataset");
  fs::path train_dataset, train_store, train_out_dir;
  TrainFlags train_flags;
  cmd_train->add_option("--dataset", train_dataset, "dataset JSONL")->required();
  cmd_train->add_option("--store", train_store, "embedding store JSON")->required();
  cmd_train->add_option("--out-dir", train_out_dir, "output directory")->required();
  train_flags.attach(cmd_train);

  // eval
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained bank on the test split");
  fs::path eval_dataset, eval_bank, eval_out;
  cmd_eval->add_option("--dataset", eval_dataset, "dataset JSONL")->required();
  cmd_eval->add_option("--bank", eval_bank, "bank JSON from train")->required();
  cmd_eval->add_option("--out", eval_out, "output report JSON")->required();

  // b2n
  auto* cmd_b2n = app.add_subcommand("b2n", "train on base classes, evaluate base and new");
  fs::path b2n_dataset, b2n_store, b2n_out_dir;
  TrainFlags b2n_flags;
  b2n_flags.cfg.epochs = 10;  // short schedule for the transfer setting
  cmd_b2n->add_option("--dataset", b2n_dataset, "dataset JSONL")->required();
  cmd_b2n->add_option("--store", b2n_store, "embedding store JSON")->required();
  cmd_b2n->add_option("--out-dir", b2n_out_dir, "output directory")->required();
  b2n_flags.attach(cmd_b2n);

  // ablate
  auto* cmd_ablate = app.add_subcommand("ablate", "run a train/eval grid and emit CSV");
  fs::path ablate_dataset, ablate_store, ablate_out_dir;
  TrainFlags ablate_base;
  std::vector<std::string> g_distill = {"cosine"};
  std::vector<std::string> g_align = {"graph"};
  std::vector<double> g_alphas = {0.2};
  std::vector<double> g_betas = {0.2};
  std::vector<int> g_ms = {4};
  std::vector<int> g_shots = {16};
  cmd_ablate->add_option("--dataset", ablate_dataset, "dataset JSONL")->required();
  cmd_ablate->add_option("--store", ablate_store, "embedding store JSON")->required();
  cmd_ablate->add_option("--out-dir", ablate_out_dir, "output directory")->required();
  cmd_ablate->add_option("--distill", g_distill, "distill modes")->capture_default_str();
  cmd_ablate->add_option("--align", g_align, "alignment modes")->capture_default_str();
  cmd_ablate->add_option("--alpha", g_alphas, "alpha grid")->capture_default_str();
  cmd_ablate->add_option("--beta", g_betas, "beta grid")->capture_default_str();
  cmd_ablate->add_option("--m", g_ms, "prompt count grid")->capture_default_str();
  cmd_ablate->add_option("--shots", g_shots, "shot grid")->capture_default_str();
  cmd_ablate->add_option("--lr", ablate_base.cfg.lr0, "initial learning rate")
      ->capture_default_str();
  cmd_ablate->add_option("--tau", ablate_base.cfg.tau, "logit temperature")
      ->capture_default_str();
  cmd_ablate->add_option("--lambda", ablate_base.cfg.sinkhorn.lambda, "entropic regularization")
      ->capture_default_str();
  cmd_ablate->add_option("--epochs", ablate_base.cfg.epochs, "epochs (0 = per-shot schedule)")
      ->capture_default_str();
  cmd_ablate->add_option("--batch-size", ablate_base.cfg.batch_size, "minibatch size")
      ->capture_default_str();
  cmd_ablate->add_option("--seed", ablate_base.cfg.seed, "shared cell seed")
      ->capture_default_str();

  // solve-ot
  auto* cmd_solve = app.add_subcommand("solve-ot", "debug transport solver");
  fs::path solve_input, solve_out;
  dualpt::transport::SinkhornConfig solve_cfg;
  cmd_solve->add_option("--input", solve_input, "JSON with /cost or /z and /w")->required();
  cmd_solve->add_option("--out", solve_out, "also write the result JSON here");
  cmd_solve->add_option("--lambda", solve_cfg.lambda, "entropic regularization")
      ->capture_default_str();
  cmd_solve->add_option("--alpha", solve_cfg.alpha, "fused weight")->capture_default_str();
  cmd_solve->add_option("--inner-max", solve_cfg.inner_max, "max Sinkhorn sweeps")
      ->capture_default_str();
  cmd_solve->add_option("--outer-max", solve_cfg.outer_max, "max fused rounds")
      ->capture_default_str();
  cmd_solve->add_option("--marginal-tol", solve_cfg.marginal_tol, "marginal tolerance")
      ->capture_default_str();
  cmd_solve->add_option("--plan-tol", solve_cfg.plan_tol, "outer plan tolerance")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) dualpt::parallel::set_max_threads(threads);

  try {
    if (*cmd_gen) return run_gen_queries(gen_classes, gen_out);
    if (*cmd_fetch) return run_fetch(fetch_classes, fetch_cache, fetch_mock, fetch_fixtures, ccfg);
    if (*cmd_embed) return run_embed(embed_cache, embed_out, embed_dim, embed_seed);
    if (*cmd_synth) return run_synth(synth_out_dir, scfg);
    if (*cmd_train)
      return run_train(train_dataset, train_store, train_out_dir, train_flags.resolve(cmd_train));
    if (*cmd_eval) return run_eval(eval_dataset, eval_bank, eval_out);
    if (*cmd_b2n) return run_b2n(b2n_dataset, b2n_store, b2n_out_dir, b2n_flags.resolve(cmd_b2n));
    if (*cmd_ablate) {
      dualpt::harness::AblationGrid grid;
      grid.distill.clear();
      for (const auto& s : g_distill) grid.distill.push_back(dualpt::alignment::distill_mode_from(s));
      grid.align.clear();
      bool fixed_alpha_mode = false;
      for (const auto& s : g_align) {
        const auto mode = dualpt::alignment::alignment_mode_from(s);
        fixed_alpha_mode |= mode == dualpt::alignment::AlignmentMode::Node ||
                            mode == dualpt::alignment::AlignmentMode::Edge;
        grid.align.push_back(mode);
      }
      if (fixed_alpha_mode && cmd_ablate->count("--alpha") > 0)
        std::cerr << "warning: node/edge alignment ignores --alpha\n";
      grid.alphas = g_alphas;
      grid.betas = g_betas;
      grid.prompt_counts = g_ms;
      grid.shots = g_shots;
      return run_ablate(ablate_dataset, ablate_store, ablate_out_dir,
                        ablate_base.resolve(cmd_ablate), grid);
    }
    if (*cmd_solve) return run_solve_ot(solve_input, solve_out, solve_cfg);
  } catch (const dualpt::FetchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dualpt::ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dualpt::NonFiniteValue& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
