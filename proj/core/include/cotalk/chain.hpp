#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotalk/dedup.hpp"
#include "cotalk/metrics.hpp"
#include "cotalk/semantic_model.hpp"

namespace cotalk::gateway {
class Gateway;
}

namespace cotalk::chain {

enum class ModeKind { single, parallel, cotalk };

inline constexpr int kDefaultMaxRounds = 6;

struct SessionMode {
  ModeKind kind = ModeKind::cotalk;
  int parallel_n = 0;                   // parallel only
  int max_rounds = kDefaultMaxRounds;  // cotalk only

  static SessionMode single() { return {ModeKind::single, 0, 1}; }
  static SessionMode parallel(int n) { return {ModeKind::parallel, n, n}; }
  static SessionMode cotalk(int max_rounds = kDefaultMaxRounds) {
    return {ModeKind::cotalk, 0, max_rounds};
  }

  /// Throws InvalidMode.
  void validate() const;
  std::string_view label() const noexcept;
  int round_limit() const noexcept;
  bool operator==(const SessionMode&) const = default;
};

nlohmann::json to_json(const SessionMode& mode);
/// Accepts {"kind": ..., "n": ..., "max_rounds": ...} or a bare label string.
SessionMode mode_from_json(const nlohmann::json& doc);

enum class PayloadKind { speech_transcript, typed_text };
std::string_view to_string(PayloadKind k) noexcept;
PayloadKind parse_payload_kind(std::string_view s);

enum class LedgerEventKind { observe_start, observe_end, read_start, read_end, output_start, output_end };
std::string_view to_string(LedgerEventKind k) noexcept;
LedgerEventKind parse_ledger_event_kind(std::string_view s);

struct LedgerEvent {
  int round_index = 0;
  LedgerEventKind kind{};
  std::int64_t t_us = 0;
  bool operator==(const LedgerEvent&) const = default;
};

/// Timestamps for one round in microseconds. Read events only for CoTalk
/// rounds after the first.
struct RoundTimestamps {
  std::int64_t observe_start = 0;
  std::int64_t observe_end = 0;
  std::optional<std::int64_t> read_start;
  std::optional<std::int64_t> read_end;
  std::int64_t output_start = 0;
  std::int64_t output_end = 0;

  /// observe_start < observe_end <= read_start < read_end <= output_start < output_end.
  /// Throws NonMonotoneTiming.
  void validate() const;
};

class TimingLedger {
 public:
  /// Appends the six (or four) events of a round. Throws NonMonotoneTiming or
  /// OutOfOrderRound.
  void record_round(int round_index, const RoundTimestamps& ts);

  const std::vector<LedgerEvent>& events() const noexcept { return events_; }

  /// Seconds between the matching start/end events; 0 when neither exists.
  /// Throws LedgerIncomplete for an unmatched start or end.
  double observe_s(int round_index) const;
  double read_s(int round_index) const;
  double output_s(int round_index) const;

  /// Sum of every matched pair over rounds 1..round_count. Throws
  /// LedgerIncomplete when a round lacks observe or output pairs.
  double total_s(int round_count) const;

  bool operator==(const TimingLedger&) const = default;

 private:
  double pair_s(int round_index, LedgerEventKind start, LedgerEventKind end, bool required) const;
  std::vector<LedgerEvent> events_;
};

struct RoundTimings {
  double observe_image_s = 0.0;
  double read_previous_s = 0.0;
  double output_s = 0.0;
  bool operator==(const RoundTimings&) const = default;
};

struct AnnotationRecord {
  int round_index = 0;
  std::string annotator_id;
  PayloadKind payload_kind = PayloadKind::typed_text;
  std::string raw_text;
  std::string audio_ref;  // content hash of an uploaded blob, if any
  RoundTimings timings;
  bool processed = false;
  std::string denoised_text;
  std::vector<semantic::SemanticUnit> extracted_units;
  bool operator==(const AnnotationRecord&) const = default;
};

enum class SessionStatus { open, awaiting_merge, finalized };
std::string_view to_string(SessionStatus s) noexcept;

struct PriorServed {
  int round_index = 0;
  std::string annotator_id;
  std::int64_t read_start_us = 0;
  bool operator==(const PriorServed&) const = default;
};

struct SessionState {
  std::string session_id;
  std::string image_ref;
  SessionMode mode;
  std::vector<AnnotationRecord> rounds;
  std::optional<std::string> merged_caption;
  semantic::SemanticUnitTree merged_tree;
  std::vector<semantic::SemanticUnitTree> merged_history;  // merged tree after each merge
  SessionStatus status = SessionStatus::open;
  TimingLedger ledger;
  std::optional<PriorServed> prior;
  std::optional<std::string> finalized_by;
  std::optional<std::string> last_error;

  bool operator==(const SessionState&) const = default;
};

nlohmann::json to_json(const SessionState& s);
SessionState session_from_json(const nlohmann::json& doc);
/// SHA-256 of the canonical JSON form.
std::string state_hash(const SessionState& s);

// ---- events -----------------------------------------------------------------

/// {"type": ..., ...}. Types: session_created, prior_served, round_submitted,
/// round_processed, gateway_failed, finalized.
using SessionEvent = nlohmann::json;

/// Pure transition. Throws CorruptLog-free Errors on events that do not fit
/// the state (the replayer converts them).
void apply(SessionState& state, const SessionEvent& event);

/// Persists an event; throwing aborts the operation before the state changes.
using EventSink = std::function<void(const SessionEvent&)>;

struct RoundSubmission {
  int round_index = 0;
  std::string annotator_id;
  PayloadKind payload_kind = PayloadKind::typed_text;
  std::string text;
  std::string audio_ref;
  RoundTimestamps timestamps;  // read_start is filled from the served prior
};

struct ServedPrior {
  std::string merged_caption;
  std::string read_timer_token;
};

class Engine {
 public:
  explicit Engine(std::shared_ptr<gateway::Gateway> gateway);

  SessionState create_session(const std::string& session_id, const std::string& image_ref,
                              const SessionMode& mode, const EventSink& sink) const;
  ServedPrior serve_prior(SessionState& s, const std::string& annotator_id, std::int64_t now_us,
                          const EventSink& sink) const;
  /// On a gateway failure the round stays recorded, the session moves to
  /// awaiting_merge and GatewayFailure is thrown.
  void submit_round(SessionState& s, const RoundSubmission& submission,
                    const EventSink& sink) const;
  void retry_merge(SessionState& s, const EventSink& sink) const;
  void finalize(SessionState& s, const std::string& annotator_id, const EventSink& sink) const;

  gateway::Gateway& gateway() const noexcept { return *gateway_; }

 private:
  void process(SessionState& s, const EventSink& sink) const;
  std::shared_ptr<gateway::Gateway> gateway_;
};

/// Reconstructed from the ledger. Throws LedgerIncomplete.
double total_time(const SessionState& s);

/// Per-round duplication (round k units vs the merged state before round k),
/// for k >= 2.
std::vector<double> round_duplication(const SessionState& s,
                                      const metrics::DuplicationMatcher& matcher);

/// Throws SessionNotFinalized.
metrics::IntrinsicReport intrinsic_report(const SessionState& s,
                                          const metrics::DuplicationMatcher& matcher);

}  // namespace cotalk::chain
