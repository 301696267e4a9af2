// End-to-end tests of the command-line tool: exit codes, file outputs and
// pipeline determinism, driven through the real binary.

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "out.log";
  const std::string cmd =
      std::string(DUALPT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dualpt_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

// reports are compared with volatile timing stripped
std::string canonical_report(const fs::path& path) {
  json j = read_json(path);
  j.erase("timing");
  return j.dump();
}

}  // namespace

TEST_CASE("gen-queries happy path and empty input") {
  const fs::path dir = fresh_dir("gen");
  write_file(dir / "classes.txt", "panda\ntiger\nokapi\n");
  const auto ok = run_cli("gen-queries --classes " + (dir / "classes.txt").string() + " --out " +
                              (dir / "queries.json").string(),
                          dir);
  CHECK(ok.exit_code == 0);
  const json queries = read_json(dir / "queries.json");
  REQUIRE(queries.size() == 3);
  CHECK(queries[0]["class_name"] == "panda");
  CHECK(queries[0]["query"] ==
        "Q: What are the useful features for distinguishing a panda in a photo? "
        "Please just give me a list of short phrases. Answer: -");
  CHECK(queries[2]["class_name"] == "okapi");  // input order preserved
  CHECK(fs::exists(dir / "queries.json.manifest.json"));

  write_file(dir / "empty.txt", "\n\n");
  const auto empty = run_cli("gen-queries --classes " + (dir / "empty.txt").string() + " --out " +
                                 (dir / "q2.json").string(),
                             dir);
  CHECK(empty.exit_code == 2);
  CHECK(empty.output.find("no classes") != std::string::npos);

  const auto missing = run_cli("gen-queries --classes " + (dir / "nope.txt").string() +
                                   " --out " + (dir / "q3.json").string(),
                               dir);
  CHECK(missing.exit_code == 2);
}

TEST_CASE("fetch --mock populates the cache and is idempotent") {
  const fs::path dir = fresh_dir("fetch");
  write_file(dir / "classes.txt", "panda\nlynx\n");
  const std::string base = "fetch --classes " + (dir / "classes.txt").string() + " --cache " +
                           (dir / "cache.json").string() + " --mock";
  const auto first = run_cli(base, dir);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("2 fetched, 0 cached") != std::string::npos);
  const json cache = read_json(dir / "cache.json");
  CHECK(cache["classes"]["panda"].size() == 5);
  CHECK(cache["meta"]["model"] == "mock");

  const auto second = run_cli(base, dir);
  CHECK(second.exit_code == 0);
  CHECK(second.output.find("0 fetched, 2 cached") != std::string::npos);
}

TEST_CASE("fetch without endpoint or token exits 2; unreachable endpoint exits 3") {
  const fs::path dir = fresh_dir("fetch_fail");
  write_file(dir / "classes.txt", "panda\n");
  const auto no_endpoint = run_cli("fetch --classes " + (dir / "classes.txt").string() +
                                       " --cache " + (dir / "cache.json").string(),
                                   dir);
  CHECK(no_endpoint.exit_code == 2);

  setenv("DUALPT_LLM_TOKEN", "x", 1);
  const auto refused = run_cli("fetch --classes " + (dir / "classes.txt").string() + " --cache " +
                                   (dir / "cache.json").string() +
                                   " --endpoint http://127.0.0.1:9/v1/chat/completions"
                                   " --retries 0 --timeout 2",
                               dir);
  CHECK(refused.exit_code == 3);
}

TEST_CASE("embed builds a store from a mock cache") {
  const fs::path dir = fresh_dir("embed");
  write_file(dir / "classes.txt", "panda\ntiger\n");
  run_cli("fetch --classes " + (dir / "classes.txt").string() + " --cache " +
              (dir / "cache.json").string() + " --mock",
          dir);
  const auto r = run_cli("embed --cache " + (dir / "cache.json").string() + " --out " +
                             (dir / "store.json").string() + " --dim 16 --seed 4",
                         dir);
  CHECK(r.exit_code == 0);
  const json store = read_json(dir / "store.json");
  CHECK(store["dim"] == 16);
  CHECK(store["classes"]["panda"]["descriptors"].size() == 5);
  CHECK(store["classes"]["panda"]["anchor"].size() == 16);
}

TEST_CASE("solve-ot on the zero-cost 2x3 fixture") {
  const fs::path dir = fresh_dir("solveot");
  write_file(dir / "problem.json", R"({"cost": [[0,0,0],[0,0,0]], "p": [0.5, 0.5]})");
  const auto r = run_cli("solve-ot --input " + (dir / "problem.json").string(), dir);
  CHECK(r.exit_code == 0);
  const json out = json::parse(r.output);
  REQUIRE(out.contains("plan"));
  for (const auto& row : out["plan"])
    for (const auto& v : row) CHECK(v.get<double>() == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
  CHECK(out["converged"] == true);
  CHECK(out["objective"].get<double>() == doctest::Approx(0.0));
  CHECK(out["row_marginal_error"].get<double>() <= 1e-6);
  CHECK(out["inner_iterations"].get<int>() >= 1);

  write_file(dir / "bad.json", R"({"zz": 1})");
  const auto bad = run_cli("solve-ot --input " + (dir / "bad.json").string(), dir);
  CHECK(bad.exit_code == 2);
}

TEST_CASE("solve-ot accepts embedding blocks and reports the fused solve") {
  const fs::path dir = fresh_dir("solveot_zw");
  write_file(dir / "problem.json",
             R"({"z": [[1,0],[0,1],[0.8,0.6]], "w": [[1,0],[0,1]]})");
  const auto r = run_cli("solve-ot --input " + (dir / "problem.json").string() +
                             " --lambda 0.05 --alpha 0.2 --out " + (dir / "plan.json").string(),
                         dir);
  CHECK(r.exit_code == 0);
  const json out = json::parse(r.output);
  REQUIRE(out.contains("plan"));
  CHECK(out["plan"].size() == 3);
  CHECK(out["outer_iterations"].get<int>() >= 1);
  CHECK(out["row_marginal_error"].get<double>() <= 1e-6);
  CHECK(fs::exists(dir / "plan.json"));
  // token 0 matches prompt 0, token 1 matches prompt 1
  CHECK(out["plan"][0][0].get<double>() > out["plan"][0][1].get<double>());
  CHECK(out["plan"][1][1].get<double>() > out["plan"][1][0].get<double>());
}

TEST_CASE("synth -> train -> eval pipeline is deterministic") {
  const fs::path dir = fresh_dir("pipe");
  const std::string synth_args =
      " --classes 3 --parts 2 --tokens 6 --dim 12 --shots 1 2"
      " --test-per-class 3 --seed 5";
  const std::string train_args =
      " --shots 2 --m 2 --epochs 4 --batch-size 4 --tau 0.05 --seed 5";

  for (const char* run : {"a", "b"}) {
    const fs::path rd = dir / run;
    fs::create_directories(rd);
    auto synth = run_cli("synth --out-dir " + rd.string() + synth_args, dir);
    REQUIRE(synth.exit_code == 0);
    auto train = run_cli("train --dataset " + (rd / "dataset.jsonl").string() + " --store " +
                             (rd / "store.json").string() + " --out-dir " + rd.string() +
                             train_args,
                         dir);
    REQUIRE(train.exit_code == 0);
    auto eval = run_cli("eval --dataset " + (rd / "dataset.jsonl").string() + " --bank " +
                            (rd / "bank.json").string() + " --out " +
                            (rd / "report.json").string(),
                        dir);
    REQUIRE(eval.exit_code == 0);
  }

  // byte-identical artifacts modulo the timing field
  const auto read_text = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(read_text(dir / "a" / "dataset.jsonl") == read_text(dir / "b" / "dataset.jsonl"));
  CHECK(read_text(dir / "a" / "store.json") == read_text(dir / "b" / "store.json"));
  CHECK(read_text(dir / "a" / "bank.json") == read_text(dir / "b" / "bank.json"));
  CHECK(canonical_report(dir / "a" / "report.json") == canonical_report(dir / "b" / "report.json"));

  // manifests recorded before computation
  CHECK(fs::exists(dir / "a" / "manifest-synth.json"));
  CHECK(fs::exists(dir / "a" / "manifest-train.json"));
  const json manifest = read_json(dir / "a" / "manifest-train.json");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["epochs"] == 4);
}

TEST_CASE("ablate warns that node ignores alpha and writes the csv") {
  const fs::path dir = fresh_dir("ablate");
  auto synth = run_cli("synth --out-dir " + dir.string() +
                           " --classes 2 --parts 2 --tokens 6 --dim 10 --shots 1"
                           " --test-per-class 2 --seed 1",
                       dir);
  REQUIRE(synth.exit_code == 0);
  const fs::path out = dir / "grid";
  const auto r = run_cli("ablate --dataset " + (dir / "dataset.jsonl").string() + " --store " +
                             (dir / "store.json").string() + " --out-dir " + out.string() +
                             " --align node --alpha 0.2 --distill none --beta 0.0 --m 2"
                             " --shots 1 --epochs 2 --tau 0.05",
                         dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("node/edge alignment ignores --alpha") != std::string::npos);
  CHECK(fs::exists(out / "ablation.csv"));
  std::ifstream in(out / "ablation.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "distill,align,alpha,beta,M,shots,seed,accuracy");
}

TEST_CASE("schema violations exit 2 and point at the offending field") {
  const fs::path dir = fresh_dir("schema");
  auto synth = run_cli("synth --out-dir " + dir.string() +
                           " --classes 2 --parts 1 --tokens 4 --dim 8 --shots 1"
                           " --test-per-class 1 --seed 3",
                       dir);
  REQUIRE(synth.exit_code == 0);
  // corrupt one dataset line: tokens become a scalar
  write_file(dir / "broken.jsonl",
             R"({"label": 0, "tokens": 3, "global": [1, 0], "split": "train"})" "\n");
  const auto r = run_cli("train --dataset " + (dir / "broken.jsonl").string() + " --store " +
                             (dir / "store.json").string() + " --out-dir " +
                             (dir / "out").string() + " --shots 1 --m 1 --epochs 1",
                         dir);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/tokens") != std::string::npos);
  CHECK(r.output.find("line 1") != std::string::npos);
}

TEST_CASE("train refuses a locked output directory") {
  const fs::path dir = fresh_dir("lock");
  auto synth = run_cli("synth --out-dir " + dir.string() +
                           " --classes 2 --parts 1 --tokens 4 --dim 8 --shots 1"
                           " --test-per-class 1 --seed 2",
                       dir);
  REQUIRE(synth.exit_code == 0);
  write_file(dir / ".dualpt.lock", "");
  const auto r = run_cli("train --dataset " + (dir / "dataset.jsonl").string() + " --store " +
                             (dir / "store.json").string() + " --out-dir " + dir.string() +
                             " --shots 1 --m 1 --epochs 1 --tau 0.05",
                         dir);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("locked") != std::string::npos);
}
