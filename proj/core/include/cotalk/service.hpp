#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotalk/chain.hpp"
#include "cotalk/dedup.hpp"
#include "cotalk/error.hpp"

namespace cotalk::service {

// ---- configuration ----------------------------------------------------------

struct ApiConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "data";
  std::string gateway = "mock";  // mock | http
  std::string llm_env_prefix = "COTALK_LLM";
  std::string stt_env_prefix = "COTALK_STT";
  std::string embed_env_prefix = "COTALK_EMBED";
  metrics::MatchMode matcher_mode = metrics::MatchMode::exact;
  double matcher_threshold = metrics::kDefaultSimilarityThreshold;
  int max_rounds = chain::kDefaultMaxRounds;
  int snapshot_every = 100;  // events between snapshots; 0 disables
  int max_in_flight = 8;
  std::string bearer_token;  // empty disables auth
  std::filesystem::path audit_log;

  nlohmann::json to_json() const;  // token redacted
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Applies `key=value` lines (blank lines and '#' comments ignored), then
/// COTALK_<KEY> environment overrides. Throws InvalidConfig naming the key.
ApiConfig load_config(const std::optional<std::filesystem::path>& file,
                      const EnvLookup& env = process_env());
ApiConfig parse_config(std::string_view text, const EnvLookup& env);

/// Builds the gateway and matcher the configuration asks for.
std::shared_ptr<gateway::Gateway> make_gateway(const ApiConfig& config);
metrics::DuplicationMatcher make_matcher(const ApiConfig& config);

// ---- persistence ------------------------------------------------------------

using SessionMap = std::map<std::string, chain::SessionState>;

struct ReplayResult {
  SessionMap sessions;
  std::uint64_t last_seq = 0;
  std::size_t events_applied = 0;
  bool used_snapshot = false;
  std::optional<std::size_t> corrupt_line;  // 1-based
  std::string corrupt_detail;
};

inline constexpr const char* kEventLogName = "events.jsonl";
inline constexpr const char* kSnapshotName = "snapshot.json";

/// Rebuilds every session from `dir`. Stops at the first bad line and
/// reports it; sessions hold the state up to that line.
ReplayResult replay_directory(const std::filesystem::path& dir, bool use_snapshot = true);

/// Same, over a log stream and an optional snapshot document.
ReplayResult replay_stream(std::istream& log, const nlohmann::json* snapshot = nullptr);

/// Throws CorruptLogError when the replay hit a bad line.
SessionMap replay_or_throw(const std::filesystem::path& dir, bool use_snapshot = true);

/// Order-independent hash over every session's canonical state.
std::string store_hash(const SessionMap& sessions);

class EventLog {
 public:
  struct Options {
    int snapshot_every = 0;
    /// Runs after each durable append; tests throw from it to simulate a crash.
    std::function<void(std::uint64_t seq)> after_append;
  };

  EventLog(std::filesystem::path dir, const ReplayResult& recovered, Options options);

  /// Appends one line, updates the shadow state and snapshots when due.
  std::uint64_t append(const std::string& session_id, const chain::SessionEvent& event);

  /// Consistent copy of every session as of the last append.
  SessionMap snapshot_sessions() const;
  void write_snapshot();

 private:
  void write_snapshot_locked();

  std::filesystem::path dir_;
  Options options_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::uint64_t seq_ = 0;
  SessionMap shadow_;
};

// ---- store ------------------------------------------------------------------

struct StoreOptions {
  EventLog::Options log;
};

/// Sessions with per-session serialization. Every mutation goes through the
/// engine and is logged before it becomes visible.
class SessionStore {
 public:
  /// Replays `dir` (throws CorruptLogError on a bad log) and resumes logging.
  SessionStore(std::filesystem::path dir, std::shared_ptr<chain::Engine> engine,
               metrics::DuplicationMatcher matcher, StoreOptions options = {});

  std::string create(const std::string& image_ref, const chain::SessionMode& mode);
  chain::SessionState get(const std::string& id) const;
  chain::ServedPrior serve_prior(const std::string& id, const std::string& annotator_id,
                                 std::int64_t now_us);
  chain::SessionState submit_round(const std::string& id, const chain::RoundSubmission& sub);
  chain::SessionState retry_merge(const std::string& id);
  chain::SessionState finalize(const std::string& id, const std::string& annotator_id);
  metrics::IntrinsicReport report(const std::string& id) const;

  /// Finalized sessions, sorted by id, from one consistent snapshot.
  std::vector<chain::SessionState> finalized(const std::optional<std::string>& mode_label = {}) const;
  SessionMap all() const;

  const metrics::DuplicationMatcher& matcher() const noexcept { return matcher_; }
  chain::Engine& engine() const noexcept { return *engine_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  struct Entry {
    std::mutex mu;
    chain::SessionState state;
  };
  std::shared_ptr<Entry> find(const std::string& id) const;
  template <typename Fn>
  chain::SessionState mutate(const std::string& id, Fn&& fn);
  chain::EventSink sink_for(const std::string& id);

  std::filesystem::path dir_;
  std::shared_ptr<chain::Engine> engine_;
  metrics::DuplicationMatcher matcher_;
  std::unique_ptr<EventLog> log_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::atomic<std::uint64_t> next_id_{1};
};

// ---- export -----------------------------------------------------------------

nlohmann::json export_record(const chain::SessionState& s);
/// One canonical JSON line per finalized session, sorted by session id.
std::string export_jsonl(const std::vector<chain::SessionState>& sessions);
std::string export_metrics_csv(const std::vector<chain::SessionState>& sessions,
                               const metrics::DuplicationMatcher& matcher);

// ---- HTTP -------------------------------------------------------------------

/// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;

class Server {
 public:
  Server(ApiConfig config, std::shared_ptr<SessionStore> store);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Blocks until stop(). Returns false when the address cannot be bound.
  bool listen();
  /// Binds an ephemeral port on `host` and returns it; then call listen_after_bind().
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cotalk::service
