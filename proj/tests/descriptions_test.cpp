#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "dualpt/descriptions.hpp"
#include "dualpt/numerics.hpp"

using namespace dualpt;
namespace ds = dualpt::descriptions;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dualpt_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kPandaQuery =
    "Q: What are the useful features for distinguishing a panda in a photo? "
    "Please just give me a list of short phrases. Answer: -";

}  // namespace

TEST_CASE("build_query is byte-exact") {
  CHECK(ds::build_query("panda") == kPandaQuery);
  CHECK_THROWS_AS(ds::build_query(""), InvalidClassName);

  // substitution happens exactly once
  const std::string q = ds::build_query("a");
  std::size_t count = 0;
  for (std::size_t pos = 0; (pos = q.find("distinguishing a a ", pos)) != std::string::npos; ++pos)
    ++count;
  CHECK(count == 1);
}

TEST_CASE("parse_phrases fixtures") {
  const auto panda = ds::parse_phrases(
      "- Black and white fur pattern\n- Round face with black eye patches");
  CHECK(panda == std::vector<std::string>{"Black and white fur pattern",
                                          "Round face with black eye patches"});

  CHECK(ds::parse_phrases("").empty());
  CHECK(ds::parse_phrases("1. wings\n2) beak") == std::vector<std::string>{"wings", "beak"});
  CHECK(ds::parse_phrases("* \"quoted phrase\"\n\n  - spaced  ") ==
        std::vector<std::string>{"quoted phrase", "spaced"});
  CHECK(ds::parse_phrases("10. double digits\nplain line") ==
        std::vector<std::string>{"double digits", "plain line"});
}

TEST_CASE("cache round-trip preserves order and meta") {
  const fs::path dir = temp_dir("cache");
  ds::DescriptionCache cache;
  cache.meta.model = "gpt-3.5-turbo";
  cache.meta.temperature = 0.7;
  cache.meta.created = "2024-01-01T00:00:00Z";
  cache.classes["panda"] = {"Black and white fur pattern", "Large, furry ears"};
  cache.classes["aardvark"] = {"long tubular snout"};
  cache.save(dir / "cache.json");

  const auto loaded = ds::DescriptionCache::load(dir / "cache.json");
  CHECK(loaded == cache);
  CHECK_FALSE(fs::exists(dir / "cache.json.tmp"));  // atomic write cleaned up

  // sorted class keys in the file
  std::ifstream in(dir / "cache.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text.find("aardvark") < text.find("panda"));
}

TEST_CASE("fetch_descriptions populates, then becomes a no-op") {
  const fs::path dir = temp_dir("fetch");
  const fs::path cache_path = dir / "cache.json";
  ds::MockChatClient client;
  ds::CacheMeta meta;
  meta.model = "mock";
  const std::vector<std::string> classes{"panda", "tiger", "okapi"};

  const auto cache = ds::fetch_descriptions(classes, client, meta, cache_path);
  CHECK(client.calls() == 3);
  REQUIRE(cache.contains("panda"));
  const auto& panda = cache.classes.at("panda");
  REQUIRE(panda.size() == 5);
  CHECK(panda[0] == "Black and white fur pattern");
  CHECK(panda[1] == "Round face with black eye patches");
  CHECK(panda[2] == "Round body shape with short legs");
  CHECK(panda[3] == "Distinctive thumb on front paws");
  CHECK(panda[4] == "Large, furry ears");
  CHECK(cache.classes.at("okapi").size() == 3);  // generated fallback fixture

  // warm cache: zero transport calls, cache unchanged
  ds::MockChatClient cold;
  const auto warm = ds::fetch_descriptions(classes, cold, meta, cache_path);
  CHECK(cold.calls() == 0);
  CHECK(warm == cache);
}

namespace {

class FailingClient final : public ds::ChatClient {
 public:
  std::string complete(const std::string&) override { throw FetchError("boom"); }
};

}  // namespace

TEST_CASE("fetch failure leaves the prior cache intact") {
  const fs::path dir = temp_dir("fetch_fail");
  const fs::path cache_path = dir / "cache.json";
  ds::CacheMeta meta;

  ds::MockChatClient mock;
  ds::fetch_descriptions({"panda"}, mock, meta, cache_path);
  const auto before = ds::DescriptionCache::load(cache_path);

  FailingClient failing;
  CHECK_THROWS_AS(ds::fetch_descriptions({"panda", "lion"}, failing, meta, cache_path),
                  FetchError);
  const auto after = ds::DescriptionCache::load(cache_path);
  CHECK(after == before);

  // the error message names the failing class
  try {
    ds::fetch_descriptions({"panda", "lion"}, failing, meta, cache_path);
  } catch (const FetchError& e) {
    CHECK(std::string(e.what()).find("lion") != std::string::npos);
  }
}

TEST_CASE("http chat client against a local server") {
  httplib::Server srv;
  std::atomic<int> hits{0};
  std::string seen_auth;
  json seen_body;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    const json reply = {
        {"choices", json::array({{{"message", {{"content", "- striped tail\n- short mane"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  srv.Post("/fail500", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  srv.Post("/malformed", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  setenv("DUALPT_LLM_TOKEN", "sekrit", 1);
  ds::ClientConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.model = "gpt-3.5-turbo";
  cfg.temperature = 0.7;
  cfg.retries = 0;

  SUBCASE("success path, request shape and auth header") {
    ds::HttpChatClient client(cfg);
    const std::string text = client.complete(ds::build_query("lemur"));
    CHECK(text == "- striped tail\n- short mane");
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_body["model"] == "gpt-3.5-turbo");
    CHECK(seen_body["temperature"].get<double>() == doctest::Approx(0.7));
    REQUIRE(seen_body["messages"].size() == 1);
    CHECK(seen_body["messages"][0]["role"] == "user");
    CHECK(seen_body["messages"][0]["content"] == ds::build_query("lemur"));
  }

  SUBCASE("5xx surfaces as FetchError and keeps the cache intact") {
    const fs::path dir = temp_dir("http500");
    ds::ClientConfig bad = cfg;
    bad.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/fail500";
    CHECK_THROWS_AS(ds::fetch_descriptions({"lemur"}, bad, dir / "cache.json"), FetchError);
    CHECK_FALSE(fs::exists(dir / "cache.json"));
  }

  SUBCASE("malformed body surfaces as ProtocolError") {
    ds::ClientConfig bad = cfg;
    bad.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/malformed";
    ds::HttpChatClient client(bad);
    CHECK_THROWS_AS(client.complete("hello"), ProtocolError);
  }

  srv.stop();
  server_thread.join();
}

#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
TEST_CASE("http chat client speaks TLS") {
  const fs::path dir = temp_dir("tls");
  const fs::path cert = dir / "cert.pem";
  const fs::path key = dir / "key.pem";
  const std::string gen =
      "openssl req -x509 -newkey rsa:2048 -keyout " + key.string() + " -out " + cert.string() +
      " -days 1 -nodes -subj /CN=127.0.0.1 > /dev/null 2>&1";
  REQUIRE(std::system(gen.c_str()) == 0);

  httplib::SSLServer srv(cert.c_str(), key.c_str());
  srv.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    const json reply = {
        {"choices", json::array({{{"message", {{"content", "- over tls"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ds::ClientConfig cfg;
  cfg.endpoint = "https://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.retries = 0;
  cfg.verify_tls = false;  // self-signed test certificate
  ds::HttpChatClient client(cfg);
  CHECK(client.complete("hello") == "- over tls");

  // with verification on, the self-signed certificate must be rejected
  ds::ClientConfig strict = cfg;
  strict.verify_tls = true;
  ds::HttpChatClient strict_client(strict);
  CHECK_THROWS_AS(strict_client.complete("hello"), FetchError);

  srv.stop();
  server_thread.join();
}
#endif

TEST_CASE("mock_encode determinism and separation") {
  const auto a = ds::mock_encode("panda", 32, 7);
  const auto b = ds::mock_encode("panda", 32, 7);
  CHECK(a == b);
  CHECK(std::fabs(numerics::norm(a) - 1.0) <= 1e-12);

  const auto t = ds::mock_encode("tiger", 32, 7);
  const double cos = numerics::dot(a, t);  // both unit
  CHECK(std::fabs(cos) < 0.5);
  // frozen on first run; drift means the encoder stream changed
  CHECK(cos == doctest::Approx(-0.03585826427091781).epsilon(1e-9));

  // different seeds decorrelate
  CHECK(ds::mock_encode("panda", 32, 8) != a);
  CHECK_THROWS_AS(ds::mock_encode("panda", 1, 7), InvalidDim);
}

TEST_CASE("panda descriptions embed to the locked golden store") {
  ds::DescriptionCache cache;
  cache.classes["panda"] = {
      "Black and white fur pattern", "Round face with black eye patches",
      "Round body shape with short legs", "Distinctive thumb on front paws",
      "Large, furry ears"};
  const auto store = ds::embed_descriptions(
      cache, [](const std::string& text) { return ds::mock_encode(text, 32, 7); }, 32);
  const auto golden =
      ds::EmbeddingStore::load(fs::path(DUALPT_GOLDEN_DIR) / "panda_store.json");
  REQUIRE(golden.classes.count("panda") == 1);
  const auto& got = store.classes.at("panda");
  const auto& want = golden.classes.at("panda");
  REQUIRE(got.descriptors.rows() == want.descriptors.rows());
  CHECK(max_abs_diff(got.descriptors, want.descriptors) <= 1e-12);
  for (std::size_t t = 0; t < 32; ++t)
    CHECK(std::fabs(got.anchor[t] - want.anchor[t]) <= 1e-12);
}

TEST_CASE("embed_descriptions shapes and store round-trip") {
  ds::DescriptionCache cache;
  cache.classes["panda"] = {"Black and white fur pattern", "Large, furry ears",
                            "Large, furry ears"};  // duplicates stay
  const auto encoder = [](const std::string& text) { return ds::mock_encode(text, 16, 3); };
  const auto store = ds::embed_descriptions(cache, encoder, 16);
  REQUIRE(store.classes.count("panda") == 1);
  const auto& panda = store.classes.at("panda");
  CHECK(panda.descriptors.rows() == 3);
  CHECK(panda.descriptors.cols() == 16);
  for (std::size_t t = 0; t < 16; ++t)
    CHECK(panda.descriptors(1, t) == panda.descriptors(2, t));
  CHECK(panda.anchor.size() == 16);

  const fs::path dir = temp_dir("store");
  store.save(dir / "store.json");
  const auto loaded = ds::EmbeddingStore::load(dir / "store.json");
  CHECK(loaded == store);

  ds::DescriptionCache empty;
  empty.classes["void"] = {};
  CHECK_THROWS_AS(ds::embed_descriptions(empty, encoder, 16), MissingDescriptors);
}

TEST_CASE("embed + encode pipeline is deterministic end to end") {
  ds::DescriptionCache cache;
  cache.classes["panda"] = {"Black and white fur pattern", "Round face with black eye patches"};
  const auto encoder = [](const std::string& text) { return ds::mock_encode(text, 24, 11); };
  const auto store1 = ds::embed_descriptions(cache, encoder, 24);
  const auto store2 = ds::embed_descriptions(cache, encoder, 24);
  CHECK(store1 == store2);
}
