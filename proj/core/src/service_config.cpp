#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cotalk/embedding.hpp"
#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/service.hpp"
#include "cotalk/text.hpp"

namespace cotalk::service {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
}

int to_int(const std::string& key, const std::string& v, int lo, int hi) {
  try {
    std::size_t used = 0;
    int n = std::stoi(v, &used);
    if (used != v.size()) bad(key, "not an integer: '" + v + "'");
    if (n < lo || n > hi) bad(key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return n;
  } catch (const std::logic_error&) {
    bad(key, "not an integer: '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v, double lo, double hi) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) bad(key, "not a number: '" + v + "'");
    if (!(d >= lo && d <= hi)) bad(key, "out of range");
    return d;
  } catch (const std::logic_error&) {
    bad(key, "not a number: '" + v + "'");
  }
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "host",           "port",          "data_dir",          "gateway",
      "llm_env_prefix", "stt_env_prefix", "embed_env_prefix", "matcher_mode",
      "matcher_threshold", "max_rounds",  "snapshot_every",    "max_in_flight",
      "bearer_token",   "audit_log"};
  return keys;
}

void set(ApiConfig& c, const std::string& key, const std::string& v) {
  if (key == "host") {
    if (v.empty()) bad(key, "must not be empty");
    c.host = v;
  } else if (key == "port") {
    c.port = to_int(key, v, 0, 65535);
  } else if (key == "data_dir") {
    if (v.empty()) bad(key, "must not be empty");
    c.data_dir = v;
  } else if (key == "gateway") {
    if (v != "mock" && v != "http") bad(key, "expected 'mock' or 'http'");
    c.gateway = v;
  } else if (key == "llm_env_prefix") {
    c.llm_env_prefix = v;
  } else if (key == "stt_env_prefix") {
    c.stt_env_prefix = v;
  } else if (key == "embed_env_prefix") {
    c.embed_env_prefix = v;
  } else if (key == "matcher_mode") {
    if (v == "exact") c.matcher_mode = metrics::MatchMode::exact;
    else if (v == "embedding") c.matcher_mode = metrics::MatchMode::embedding;
    else bad(key, "expected 'exact' or 'embedding'");
  } else if (key == "matcher_threshold") {
    c.matcher_threshold = to_double(key, v, 0.0, 1.0);
  } else if (key == "max_rounds") {
    c.max_rounds = to_int(key, v, 1, 1000);
  } else if (key == "snapshot_every") {
    c.snapshot_every = to_int(key, v, 0, 1 << 30);
  } else if (key == "max_in_flight") {
    c.max_in_flight = to_int(key, v, 1, 1024);
  } else if (key == "bearer_token") {
    c.bearer_token = v;
  } else if (key == "audit_log") {
    c.audit_log = v;
  } else {
    bad(key, "unknown key");
  }
}

std::string env_name(const std::string& key) {
  std::string n = "COTALK_";
  for (char ch : key) n += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return n;
}

}  // namespace

nlohmann::json ApiConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"data_dir", data_dir.string()},
          {"gateway", gateway},
          {"matcher_mode", matcher_mode == metrics::MatchMode::exact ? "exact" : "embedding"},
          {"matcher_threshold", matcher_threshold},
          {"max_rounds", max_rounds},
          {"snapshot_every", snapshot_every},
          {"max_in_flight", max_in_flight},
          {"auth", bearer_token.empty() ? "none" : "bearer"}};
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

ApiConfig parse_config(std::string_view content, const EnvLookup& env) {
  ApiConfig c;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) bad(t, "expected key = value");
    std::string key = text::trim(t.substr(0, eq));
    set(c, key, text::trim(t.substr(eq + 1)));
  }
  if (env) {
    for (const std::string& key : known_keys()) {
      if (auto v = env(env_name(key))) set(c, key, text::trim(*v));
    }
  }
  return c;
}

ApiConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  std::string content;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + file->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    content = buf.str();
  }
  return parse_config(content, env);
}

std::shared_ptr<gateway::Gateway> make_gateway(const ApiConfig& config) {
  gateway::GatewayOptions opts;
  opts.max_in_flight = config.max_in_flight;
  opts.audit_log = config.audit_log;
  if (config.gateway == "mock") {
    opts.backoff = {};
    return gateway::Gateway::make_mock(opts);
  }
  return std::make_shared<gateway::Gateway>(
      std::make_shared<gateway::HttpChatBackend>(gateway::HttpChatConfig::from_env(config.llm_env_prefix)),
      std::make_shared<gateway::HttpSpeechBackend>(
          gateway::HttpSpeechConfig::from_env(config.stt_env_prefix)),
      opts);
}

metrics::DuplicationMatcher make_matcher(const ApiConfig& config) {
  if (config.matcher_mode == metrics::MatchMode::exact) return metrics::DuplicationMatcher::exact();
  std::shared_ptr<const metrics::EmbeddingProvider> provider;
  if (config.gateway == "mock") {
    provider = std::make_shared<metrics::HashEmbeddingProvider>();
  } else {
    const std::string& p = config.embed_env_prefix;
    provider = std::make_shared<metrics::HttpEmbeddingProvider>(
        metrics::HttpEmbeddingConfig::from_env(p + "_ENDPOINT", p + "_MODEL", p + "_API_KEY"));
  }
  return metrics::DuplicationMatcher::embedding(provider, config.matcher_threshold);
}

}  // namespace cotalk::service
