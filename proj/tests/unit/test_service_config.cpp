#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/service.hpp"
#include "test_support.hpp"

using namespace cotalk;
using namespace cotalk::service;

namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::string config_error(std::string_view text, std::map<std::string, std::string> env = {}) {
  try {
    parse_config(text, fake_env(std::move(env)));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return {};
}

}  // namespace

TEST(Config, Defaults) {
  auto c = parse_config("", fake_env({}));
  EXPECT_EQ(c.port, 8080);
  EXPECT_EQ(c.gateway, "mock");
  EXPECT_EQ(c.matcher_mode, metrics::MatchMode::exact);
  EXPECT_DOUBLE_EQ(c.matcher_threshold, 0.85);
  EXPECT_EQ(c.max_rounds, 6);
}

TEST(Config, FileThenEnvironment) {
  auto c = parse_config(
      "# service settings\n"
      "port = 9000\n"
      "\n"
      "matcher_mode=embedding\n"
      "matcher_threshold = 0.9\n"
      "data_dir = /tmp/x\n",
      fake_env({{"COTALK_PORT", "9100"}, {"COTALK_BEARER_TOKEN", "tok"}}));
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.matcher_mode, metrics::MatchMode::embedding);
  EXPECT_DOUBLE_EQ(c.matcher_threshold, 0.9);
  EXPECT_EQ(c.data_dir, "/tmp/x");
  EXPECT_EQ(c.bearer_token, "tok");
  EXPECT_EQ(c.to_json()["auth"], "bearer");
  EXPECT_FALSE(c.to_json().dump().find("tok") != std::string::npos);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(config_error("port = eighty").find("'port'"), std::string::npos);
  EXPECT_NE(config_error("port = 70000").find("'port'"), std::string::npos);
  EXPECT_NE(config_error("matcher_threshold = 1.5").find("'matcher_threshold'"), std::string::npos);
  EXPECT_NE(config_error("matcher_mode = fuzzy").find("'matcher_mode'"), std::string::npos);
  EXPECT_NE(config_error("gateway = openai").find("'gateway'"), std::string::npos);
  EXPECT_NE(config_error("colour = blue").find("'colour'"), std::string::npos);
  EXPECT_NE(config_error("max_rounds = 0").find("'max_rounds'"), std::string::npos);
  EXPECT_NE(config_error("", {{"COTALK_SNAPSHOT_EVERY", "-1"}}).find("'snapshot_every'"), std::string::npos);
  EXPECT_NE(config_error("just some words").find("expected key = value"), std::string::npos);
}

TEST(Config, LoadFromFile) {
  cotalk::test_support::TempDir dir;
  auto path = dir.path() / "cotalk.conf";
  std::ofstream(path) << "host = 0.0.0.0\nsnapshot_every = 5\n";
  auto c = load_config(path, fake_env({}));
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.snapshot_every, 5);
  try {
    load_config(dir.path() / "missing.conf", fake_env({}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Config, Factories) {
  ApiConfig c;
  EXPECT_NE(make_gateway(c), nullptr);
  EXPECT_EQ(make_matcher(c).mode(), metrics::MatchMode::exact);
  c.matcher_mode = metrics::MatchMode::embedding;
  c.matcher_threshold = 0.7;
  auto m = make_matcher(c);
  EXPECT_EQ(m.mode(), metrics::MatchMode::embedding);
  EXPECT_DOUBLE_EQ(m.threshold(), 0.7);
  c.gateway = "http";
  c.llm_env_prefix = "COTALK_UNSET_FOR_TEST";
  try {
    make_gateway(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}
