#include "dualpt/descriptions.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dualpt/numerics.hpp"
#include "dualpt/rng.hpp"

// httplib is pulled in here only; keep it out of the public headers.
#include "httplib.h"

namespace dualpt::descriptions {

using nlohmann::json;

namespace {

std::string iso8601_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// "- x", "* x", "1. x", "2) x" -> "x"
std::string strip_bullet(const std::string& line) {
  std::size_t i = 0;
  const std::size_t n = line.size();
  if (i < n && (line[i] == '-' || line[i] == '*' || line[i] == '+')) {
    ++i;
  } else {
    std::size_t j = i;
    while (j < n && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i && j < n && (line[j] == '.' || line[j] == ')')) i = j + 1;
  }
  return line.substr(i);
}

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2) {
    const char a = s.front(), b = s.back();
    if ((a == '"' && b == '"') || (a == '\'' && b == '\''))
      return s.substr(1, s.size() - 2);
  }
  return s;
}

// Parsers below surface bad fields as SchemaError with a JSON-pointer path.
const json& expect(const json& j, const char* key, json::value_t type, const std::string& where) {
  if (!j.contains(key))
    throw SchemaError("missing field at " + where + "/" + key);
  const json& v = j.at(key);
  const bool num_ok = type == json::value_t::number_float && v.is_number();
  if (v.type() != type && !num_ok)
    throw SchemaError("wrong type at " + where + "/" + key);
  return v;
}

}  // namespace

std::string build_query(const std::string& class_name) {
  if (class_name.empty()) throw InvalidClassName("class name must be non-empty");
  return "Q: What are the useful features for distinguishing a " + class_name +
         " in a photo? Please just give me a list of short phrases. Answer: -";
}

std::vector<std::string> parse_phrases(const std::string& response_text) {
  std::vector<std::string> phrases;
  std::istringstream in(response_text);
  std::string line;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    s = trim(strip_bullet(s));
    s = trim(strip_quotes(s));
    if (!s.empty()) phrases.push_back(s);
  }
  return phrases;
}

DescriptionCache DescriptionCache::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("description cache is not valid JSON: " + std::string(e.what()));
  }
  DescriptionCache cache;
  const json& meta = expect(j, "meta", json::value_t::object, "");
  cache.meta.model = expect(meta, "model", json::value_t::string, "/meta").get<std::string>();
  cache.meta.temperature =
      expect(meta, "temperature", json::value_t::number_float, "/meta").get<double>();
  cache.meta.created = expect(meta, "created", json::value_t::string, "/meta").get<std::string>();
  const json& classes = expect(j, "classes", json::value_t::object, "");
  for (const auto& [name, phrases] : classes.items()) {
    if (!phrases.is_array()) throw SchemaError("wrong type at /classes/" + name);
    std::vector<std::string> list;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
      if (!phrases[i].is_string())
        throw SchemaError("wrong type at /classes/" + name + "/" + std::to_string(i));
      list.push_back(phrases[i].get<std::string>());
    }
    cache.classes[name] = std::move(list);
  }
  return cache;
}

void DescriptionCache::save(const std::filesystem::path& path) const {
  json j;
  j["meta"]["model"] = meta.model;
  j["meta"]["temperature"] = meta.temperature;
  j["meta"]["created"] = meta.created.empty() ? iso8601_now() : meta.created;
  j["classes"] = json::object();
  for (const auto& [name, phrases] : classes) j["classes"][name] = phrases;
  atomic_write(path, j.dump(2) + "\n");
}

HttpChatClient::HttpChatClient(ClientConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw InvalidConfig("chat client needs an endpoint URL");
}

std::string HttpChatClient::complete(const std::string& prompt) {
  // split the endpoint into base (scheme://host[:port]) and path
  const std::size_t scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw InvalidConfig("endpoint must carry a scheme");
  const std::size_t slash = cfg_.endpoint.find('/', scheme + 3);
  const std::string base = slash == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);

  json body;
  body["model"] = cfg_.model;
  body["temperature"] = cfg_.temperature;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});

  httplib::Headers headers;
  if (const char* token = std::getenv(cfg_.token_env.c_str()); token != nullptr && *token != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + token);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    httplib::Client cli(base);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    cli.enable_server_certificate_verification(cfg_.verify_tls);
#endif
    cli.set_connection_timeout(cfg_.timeout_seconds, 0);
    cli.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Result res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw FetchError("HTTP " + std::to_string(res->status));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw ProtocolError("response body is not valid JSON");
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
      throw ProtocolError("response carries no choices");
    const json& msg = reply["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") ||
        !msg["message"]["content"].is_string())
      throw ProtocolError("response choice carries no message content");
    return msg["message"]["content"].get<std::string>();
  }
  throw FetchError(last_error.empty() ? "request failed" : last_error);
}

MockChatClient::MockChatClient() {
  fixtures_["panda"] = {
      "Black and white fur pattern",
      "Round face with black eye patches",
      "Round body shape with short legs",
      "Distinctive thumb on front paws",
      "Large, furry ears",
  };
  fixtures_["tiger"] = {
      "Orange coat with black stripes",
      "White underbelly and cheek fur",
      "Long banded tail",
      "Powerful forelimbs and large paws",
  };
}

MockChatClient::MockChatClient(std::map<std::string, std::vector<std::string>> fixtures)
    : fixtures_(std::move(fixtures)) {}

std::string MockChatClient::complete(const std::string& prompt) {
  ++calls_;
  // recover the class name from the fixed query template
  static const std::string kBefore = "distinguishing a ";
  static const std::string kAfter = " in a photo?";
  std::string name;
  const std::size_t b = prompt.find(kBefore);
  const std::size_t e = prompt.find(kAfter);
  if (b != std::string::npos && e != std::string::npos && e > b + kBefore.size())
    name = prompt.substr(b + kBefore.size(), e - b - kBefore.size());

  std::vector<std::string> phrases;
  if (const auto it = fixtures_.find(name); it != fixtures_.end()) {
    phrases = it->second;
  } else {
    phrases = {"distinctive " + name + " silhouette", "typical " + name + " coloring",
               "characteristic " + name + " surface texture"};
  }
  std::string out;
  for (const std::string& p : phrases) out += "- " + p + "\n";
  return out;
}

DescriptionCache fetch_descriptions(const std::vector<std::string>& classes, ChatClient& client,
                                    const CacheMeta& meta,
                                    const std::filesystem::path& cache_path) {
  DescriptionCache cache;
  if (std::filesystem::exists(cache_path)) {
    cache = DescriptionCache::load(cache_path);
  } else {
    cache.meta = meta;
    if (cache.meta.created.empty()) cache.meta.created = iso8601_now();
  }

  bool fetched_any = false;
  for (const std::string& name : classes) {
    if (cache.contains(name)) continue;
    const std::string query = build_query(name);
    std::string text;
    try {
      text = client.complete(query);
    } catch (const ProtocolError&) {
      throw;
    } catch (const Error& e) {
      throw FetchError("class '" + name + "': " + e.what());
    }
    cache.classes[name] = parse_phrases(text);
    fetched_any = true;
  }
  if (fetched_any) cache.save(cache_path);
  return cache;
}

DescriptionCache fetch_descriptions(const std::vector<std::string>& classes,
                                    const ClientConfig& config,
                                    const std::filesystem::path& cache_path) {
  HttpChatClient client(config);
  CacheMeta meta;
  meta.model = config.model;
  meta.temperature = config.temperature;
  return fetch_descriptions(classes, client, meta, cache_path);
}

std::vector<double> mock_encode(const std::string& text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw InvalidDim("mock_encode: dim must be >= 2");
  rng::Generator g(rng::fnv1a64(text, seed));
  const std::vector<double> v = rng::normal_vector(dim, g);
  return numerics::l2_normalize(v);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("embedding store is not valid JSON: " + std::string(e.what()));
  }
  EmbeddingStore store;
  if (!j.contains("dim") || !j["dim"].is_number_unsigned())
    throw SchemaError("missing or wrong type at /dim");
  store.dim = j["dim"].get<std::size_t>();
  const json& classes = expect(j, "classes", json::value_t::object, "");
  for (const auto& [name, entry] : classes.items()) {
    const std::string where = "/classes/" + name;
    if (!entry.is_object()) throw SchemaError("wrong type at " + where);
    if (!entry.contains("descriptors") || !entry["descriptors"].is_array())
      throw SchemaError("missing descriptors at " + where);
    ClassEmbedding ce;
    const json& rows = entry["descriptors"];
    ce.descriptors = Matrix(rows.size(), store.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != store.dim)
        throw SchemaError("bad descriptor row at " + where + "/descriptors/" + std::to_string(i));
      for (std::size_t t = 0; t < store.dim; ++t) {
        if (!rows[i][t].is_number())
          throw SchemaError("bad descriptor value at " + where + "/descriptors/" +
                            std::to_string(i) + "/" + std::to_string(t));
        ce.descriptors(i, t) = rows[i][t].get<double>();
      }
    }
    if (entry.contains("anchor") && !entry["anchor"].is_null()) {
      const json& anchor = entry["anchor"];
      if (!anchor.is_array() || anchor.size() != store.dim)
        throw SchemaError("bad anchor at " + where + "/anchor");
      ce.anchor.resize(store.dim);
      for (std::size_t t = 0; t < store.dim; ++t) ce.anchor[t] = anchor[t].get<double>();
    }
    store.classes[name] = std::move(ce);
  }
  return store;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  json j;
  j["dim"] = dim;
  j["classes"] = json::object();
  for (const auto& [name, ce] : classes) {
    json rows = json::array();
    for (std::size_t i = 0; i < ce.descriptors.rows(); ++i) {
      json row = json::array();
      for (std::size_t t = 0; t < ce.descriptors.cols(); ++t) row.push_back(ce.descriptors(i, t));
      rows.push_back(std::move(row));
    }
    j["classes"][name]["descriptors"] = std::move(rows);
    if (!ce.anchor.empty()) j["classes"][name]["anchor"] = ce.anchor;
  }
  atomic_write(path, j.dump(2) + "\n");
}

EmbeddingStore embed_descriptions(const DescriptionCache& cache, const Encoder& encode,
                                  std::size_t dim) {
  if (dim < 2) throw InvalidDim("embed_descriptions: dim must be >= 2");
  EmbeddingStore store;
  store.dim = dim;
  for (const auto& [name, phrases] : cache.classes) {
    if (phrases.empty()) throw MissingDescriptors("class '" + name + "' has no phrases");
    ClassEmbedding ce;
    ce.descriptors = Matrix(phrases.size(), dim);
    for (std::size_t i = 0; i < phrases.size(); ++i) {
      std::vector<double> v = encode(phrases[i]);
      if (v.size() != dim) throw ShapeMismatch("encoder returned a wrong-sized vector");
      v = numerics::l2_normalize(v);
      for (std::size_t t = 0; t < dim; ++t) ce.descriptors(i, t) = v[t];
    }
    std::vector<double> anchor = encode(name);
    if (anchor.size() != dim) throw ShapeMismatch("encoder returned a wrong-sized vector");
    ce.anchor = numerics::l2_normalize(anchor);
    store.classes[name] = std::move(ce);
  }
  return store;
}

}  // namespace dualpt::descriptions
