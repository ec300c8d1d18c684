#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "cotalk/dedup.hpp"
#include "cotalk/semantic_model.hpp"

namespace cotalk::test_support {

using semantic::AttributeKind;
using semantic::SemanticUnit;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("cotalk-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& object_pool() {
  static const std::vector<std::string> pool{"car", "road", "tree", "sky", "house", "dog", "bench"};
  return pool;
}

inline const std::vector<std::string>& value_pool() {
  static const std::vector<std::string> pool{"black", "red", "two", "large", "round", "wooden",
                                             "left", "green", "small", "many"};
  return pool;
}

/// Random units over small pools, so duplicates and shared objects are common.
inline std::vector<SemanticUnit> random_units(std::mt19937_64& rng, int count) {
  std::uniform_int_distribution<std::size_t> obj(0, object_pool().size() - 1);
  std::uniform_int_distribution<std::size_t> val(0, value_pool().size() - 1);
  std::uniform_int_distribution<int> kind(0, static_cast<int>(semantic::kAttributeKindCount) - 1);
  std::uniform_int_distribution<int> coin(0, 9);
  std::vector<SemanticUnit> out;
  for (int i = 0; i < count; ++i) {
    const std::string& name = object_pool()[obj(rng)];
    if (coin(rng) == 0) {
      out.push_back(SemanticUnit::existence(name));
    } else {
      out.push_back(SemanticUnit::make(name, static_cast<AttributeKind>(kind(rng)), value_pool()[val(rng)]));
    }
  }
  return out;
}

/// Exhaustive optimum over every partial injection a -> b: maximum
/// cardinality, then maximum quantized similarity; the first optimum in
/// row-lexicographic order (columns ascending, unmatched last) wins.
struct BruteForceResult {
  std::vector<std::optional<std::size_t>> assignment;
  std::size_t cardinality = 0;
  std::int64_t quantized_total = 0;
};

inline BruteForceResult brute_force_match(std::size_t rows, std::size_t cols,
                                          const std::vector<double>& sims) {
  BruteForceResult best;
  bool have = false;
  std::vector<std::optional<std::size_t>> cur(rows);
  std::vector<char> used(cols, 0);
  std::function<void(std::size_t, std::size_t, std::int64_t)> rec = [&](std::size_t i, std::size_t card,
                                                                       std::int64_t total) {
    if (i == rows) {
      if (!have || card > best.cardinality ||
          (card == best.cardinality && total > best.quantized_total)) {
        best = {cur, card, total};
        have = true;
      }
      return;
    }
    for (std::size_t j = 0; j < cols; ++j) {
      double s = sims[i * cols + j];
      if (used[j] || s < 0.0) continue;
      used[j] = 1;
      cur[i] = j;
      rec(i + 1, card + 1, total + std::llround(s * 1e6));
      used[j] = 0;
    }
    cur[i].reset();
    rec(i + 1, card, total);
  };
  rec(0, 0, 0);
  return best;
}

/// Small HTTP server on an ephemeral loopback port, run on a background thread.
class FakeServer {
 public:
  FakeServer() = default;
  ~FakeServer() { stop(); }
  FakeServer(const FakeServer&) = delete;
  FakeServer& operator=(const FakeServer&) = delete;

  httplib::Server& server() { return server_; }

  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace cotalk::test_support
