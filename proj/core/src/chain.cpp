#include "cotalk/chain.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/hash.hpp"
#include "cotalk/text.hpp"

namespace cotalk::chain {

using nlohmann::json;
using semantic::SemanticUnit;
using semantic::SemanticUnitTree;

namespace {

constexpr std::array<std::string_view, 6> kLedgerKinds{
    "observe_start", "observe_end", "read_start", "read_end", "output_start", "output_end"};

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

json units_json(const std::vector<SemanticUnit>& units) {
  json arr = json::array();
  for (const auto& u : units) arr.push_back(semantic::to_state_json(u));
  return arr;
}

std::vector<SemanticUnit> units_from(const json& arr) {
  std::vector<SemanticUnit> out;
  for (const auto& u : arr) out.push_back(semantic::unit_from_state_json(u));
  return out;
}

json timestamps_json(const RoundTimestamps& ts) {
  json j = {{"observe_start", ts.observe_start},
            {"observe_end", ts.observe_end},
            {"output_start", ts.output_start},
            {"output_end", ts.output_end}};
  if (ts.read_start) j["read_start"] = *ts.read_start;
  if (ts.read_end) j["read_end"] = *ts.read_end;
  return j;
}

RoundTimestamps timestamps_from(const json& j) {
  RoundTimestamps ts;
  ts.observe_start = j.at("observe_start").get<std::int64_t>();
  ts.observe_end = j.at("observe_end").get<std::int64_t>();
  ts.output_start = j.at("output_start").get<std::int64_t>();
  ts.output_end = j.at("output_end").get<std::int64_t>();
  if (j.contains("read_start")) ts.read_start = j.at("read_start").get<std::int64_t>();
  if (j.contains("read_end")) ts.read_end = j.at("read_end").get<std::int64_t>();
  return ts;
}

double us_to_s(std::int64_t us) { return static_cast<double>(us) / 1e6; }

}  // namespace

// ---- mode -------------------------------------------------------------------

void SessionMode::validate() const {
  switch (kind) {
    case ModeKind::single:
      return;
    case ModeKind::parallel:
      if (parallel_n < 2) fail(ErrorCode::InvalidMode, "parallel mode needs n >= 2");
      return;
    case ModeKind::cotalk:
      if (max_rounds < 1) fail(ErrorCode::InvalidMode, "cotalk max_rounds must be >= 1");
      return;
  }
}

std::string_view SessionMode::label() const noexcept {
  switch (kind) {
    case ModeKind::single: return "single";
    case ModeKind::parallel: return "parallel";
    case ModeKind::cotalk: return "cotalk";
  }
  return "unknown";
}

int SessionMode::round_limit() const noexcept {
  switch (kind) {
    case ModeKind::single: return 1;
    case ModeKind::parallel: return parallel_n;
    case ModeKind::cotalk: return max_rounds;
  }
  return 0;
}

json to_json(const SessionMode& mode) {
  json j = {{"kind", mode.label()}};
  if (mode.kind == ModeKind::parallel) j["n"] = mode.parallel_n;
  if (mode.kind == ModeKind::cotalk) j["max_rounds"] = mode.max_rounds;
  return j;
}

SessionMode mode_from_json(const json& doc) {
  std::string kind;
  if (doc.is_string()) {
    kind = doc.get<std::string>();
  } else if (doc.is_object() && doc.contains("kind") && doc["kind"].is_string()) {
    kind = doc["kind"].get<std::string>();
  } else {
    fail(ErrorCode::InvalidMode, "mode must be a label or an object with 'kind'");
  }
  auto int_field = [&](const char* key, int fallback) {
    if (!doc.is_object() || !doc.contains(key)) return fallback;
    if (!doc[key].is_number_integer()) fail(ErrorCode::InvalidMode, std::string(key) + " must be an integer");
    return doc[key].get<int>();
  };
  SessionMode m;
  if (kind == "single") {
    m = SessionMode::single();
  } else if (kind == "parallel") {
    m = SessionMode::parallel(int_field("n", 2));
  } else if (kind == "cotalk") {
    m = SessionMode::cotalk(int_field("max_rounds", kDefaultMaxRounds));
  } else {
    fail(ErrorCode::InvalidMode, "unknown mode '" + kind + "'");
  }
  m.validate();
  return m;
}

std::string_view to_string(PayloadKind k) noexcept {
  return k == PayloadKind::speech_transcript ? "speech_transcript" : "typed_text";
}

PayloadKind parse_payload_kind(std::string_view s) {
  if (s == "speech_transcript") return PayloadKind::speech_transcript;
  if (s == "typed_text") return PayloadKind::typed_text;
  fail(ErrorCode::InvalidArgument, "unknown payload_kind '" + std::string(s) + "'");
}

std::string_view to_string(LedgerEventKind k) noexcept {
  return kLedgerKinds[static_cast<std::size_t>(k)];
}

LedgerEventKind parse_ledger_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kLedgerKinds.size(); ++i) {
    if (kLedgerKinds[i] == s) return static_cast<LedgerEventKind>(i);
  }
  fail(ErrorCode::InvalidArgument, "unknown ledger event '" + std::string(s) + "'");
}

std::string_view to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::open: return "open";
    case SessionStatus::awaiting_merge: return "awaiting_merge";
    case SessionStatus::finalized: return "finalized";
  }
  return "unknown";
}

// ---- timing ledger ------------------------------------------------------------

void RoundTimestamps::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::NonMonotoneTiming, what); };
  if (read_start.has_value() != read_end.has_value()) bad("read_start and read_end come in pairs");
  if (!(observe_start < observe_end)) bad("observe_start must precede observe_end");
  std::int64_t cursor = observe_end;
  if (read_start) {
    if (!(cursor <= *read_start)) bad("read_start precedes observe_end");
    if (!(*read_start < *read_end)) bad("read_start must precede read_end");
    cursor = *read_end;
  }
  if (!(cursor <= output_start)) bad("output_start precedes the previous phase");
  if (!(output_start < output_end)) bad("output_start must precede output_end");
}

void TimingLedger::record_round(int round_index, const RoundTimestamps& ts) {
  int last = events_.empty() ? 0 : events_.back().round_index;
  if (round_index != last + 1) {
    fail(ErrorCode::OutOfOrderRound, "ledger expects round " + std::to_string(last + 1));
  }
  ts.validate();
  auto push = [&](LedgerEventKind k, std::int64_t t) { events_.push_back({round_index, k, t}); };
  push(LedgerEventKind::observe_start, ts.observe_start);
  push(LedgerEventKind::observe_end, ts.observe_end);
  if (ts.read_start) {
    push(LedgerEventKind::read_start, *ts.read_start);
    push(LedgerEventKind::read_end, *ts.read_end);
  }
  push(LedgerEventKind::output_start, ts.output_start);
  push(LedgerEventKind::output_end, ts.output_end);
}

double TimingLedger::pair_s(int round_index, LedgerEventKind start, LedgerEventKind end,
                            bool required) const {
  const LedgerEvent* s = nullptr;
  const LedgerEvent* e = nullptr;
  for (const LedgerEvent& ev : events_) {
    if (ev.round_index != round_index) continue;
    if (ev.kind == start) s = s ? nullptr : &ev;
    if (ev.kind == end) e = e ? nullptr : &ev;
  }
  if (!s && !e && !required) return 0.0;
  if (!s || !e || e->t_us < s->t_us) {
    fail(ErrorCode::LedgerIncomplete, "round " + std::to_string(round_index) + " lacks a matched " +
                                          std::string(to_string(start)) + "/" +
                                          std::string(to_string(end)) + " pair");
  }
  return us_to_s(e->t_us - s->t_us);
}

double TimingLedger::observe_s(int r) const {
  return pair_s(r, LedgerEventKind::observe_start, LedgerEventKind::observe_end, false);
}
double TimingLedger::read_s(int r) const {
  return pair_s(r, LedgerEventKind::read_start, LedgerEventKind::read_end, false);
}
double TimingLedger::output_s(int r) const {
  return pair_s(r, LedgerEventKind::output_start, LedgerEventKind::output_end, false);
}

double TimingLedger::total_s(int round_count) const {
  double total = 0.0;
  for (int r = 1; r <= round_count; ++r) {
    total += pair_s(r, LedgerEventKind::observe_start, LedgerEventKind::observe_end, true);
    total += read_s(r);
    total += pair_s(r, LedgerEventKind::output_start, LedgerEventKind::output_end, true);
  }
  return total;
}

// ---- state serialization ------------------------------------------------------

json to_json(const SessionState& s) {
  json rounds = json::array();
  for (const AnnotationRecord& r : s.rounds) {
    rounds.push_back({{"round_index", r.round_index},
                      {"annotator_id", r.annotator_id},
                      {"payload_kind", to_string(r.payload_kind)},
                      {"raw_text", r.raw_text},
                      {"audio_ref", r.audio_ref},
                      {"timings",
                       {{"observe_image_s", r.timings.observe_image_s},
                        {"read_previous_s", r.timings.read_previous_s},
                        {"output_s", r.timings.output_s}}},
                      {"processed", r.processed},
                      {"denoised_text", r.denoised_text},
                      {"extracted_units", units_json(r.extracted_units)}});
  }
  json ledger = json::array();
  for (const LedgerEvent& e : s.ledger.events()) {
    ledger.push_back({{"round_index", e.round_index}, {"event_kind", to_string(e.kind)},
                      {"timestamp_us", e.t_us}});
  }
  json history = json::array();
  for (const auto& t : s.merged_history) history.push_back(semantic::to_state_json(t));
  json j = {{"session_id", s.session_id},
            {"image_ref", s.image_ref},
            {"mode", to_json(s.mode)},
            {"rounds", rounds},
            {"merged_caption", s.merged_caption ? json(*s.merged_caption) : json(nullptr)},
            {"merged_tree", semantic::to_state_json(s.merged_tree)},
            {"merged_history", history},
            {"status", to_string(s.status)},
            {"ledger", ledger},
            {"prior", nullptr},
            {"finalized_by", s.finalized_by ? json(*s.finalized_by) : json(nullptr)},
            {"last_error", s.last_error ? json(*s.last_error) : json(nullptr)}};
  if (s.prior) {
    j["prior"] = {{"round_index", s.prior->round_index},
                  {"annotator_id", s.prior->annotator_id},
                  {"read_start_us", s.prior->read_start_us}};
  }
  return j;
}

SessionState session_from_json(const json& j) {
  SessionState s;
  s.session_id = j.at("session_id").get<std::string>();
  s.image_ref = j.at("image_ref").get<std::string>();
  s.mode = mode_from_json(j.at("mode"));
  for (const json& r : j.at("rounds")) {
    AnnotationRecord a;
    a.round_index = r.at("round_index").get<int>();
    a.annotator_id = r.at("annotator_id").get<std::string>();
    a.payload_kind = parse_payload_kind(r.at("payload_kind").get<std::string>());
    a.raw_text = r.at("raw_text").get<std::string>();
    a.audio_ref = r.at("audio_ref").get<std::string>();
    const json& t = r.at("timings");
    a.timings = {t.at("observe_image_s").get<double>(), t.at("read_previous_s").get<double>(),
                 t.at("output_s").get<double>()};
    a.processed = r.at("processed").get<bool>();
    a.denoised_text = r.at("denoised_text").get<std::string>();
    a.extracted_units = units_from(r.at("extracted_units"));
    s.rounds.push_back(std::move(a));
  }
  if (!j.at("merged_caption").is_null()) s.merged_caption = j["merged_caption"].get<std::string>();
  s.merged_tree = semantic::tree_from_state_json(j.at("merged_tree"));
  for (const json& t : j.at("merged_history")) {
    s.merged_history.push_back(semantic::tree_from_state_json(t));
  }
  std::string status = j.at("status").get<std::string>();
  if (status == "open") s.status = SessionStatus::open;
  else if (status == "awaiting_merge") s.status = SessionStatus::awaiting_merge;
  else if (status == "finalized") s.status = SessionStatus::finalized;
  else fail(ErrorCode::InvalidArgument, "unknown status '" + status + "'");

  // Rebuild the ledger round by round so its invariants are re-checked.
  std::map<int, RoundTimestamps> per_round;
  for (const json& e : j.at("ledger")) {
    int r = e.at("round_index").get<int>();
    std::int64_t t = e.at("timestamp_us").get<std::int64_t>();
    RoundTimestamps& ts = per_round[r];
    switch (parse_ledger_event_kind(e.at("event_kind").get<std::string>())) {
      case LedgerEventKind::observe_start: ts.observe_start = t; break;
      case LedgerEventKind::observe_end: ts.observe_end = t; break;
      case LedgerEventKind::read_start: ts.read_start = t; break;
      case LedgerEventKind::read_end: ts.read_end = t; break;
      case LedgerEventKind::output_start: ts.output_start = t; break;
      case LedgerEventKind::output_end: ts.output_end = t; break;
    }
  }
  for (const auto& [r, ts] : per_round) s.ledger.record_round(r, ts);

  if (!j.at("prior").is_null()) {
    const json& p = j["prior"];
    s.prior = PriorServed{p.at("round_index").get<int>(), p.at("annotator_id").get<std::string>(),
                          p.at("read_start_us").get<std::int64_t>()};
  }
  if (!j.at("finalized_by").is_null()) s.finalized_by = j["finalized_by"].get<std::string>();
  if (!j.at("last_error").is_null()) s.last_error = j["last_error"].get<std::string>();
  return s;
}

std::string state_hash(const SessionState& s) { return sha256_hex(to_json(s).dump()); }

// ---- transitions --------------------------------------------------------------

namespace {

void require_open(const SessionState& s) {
  if (s.status == SessionStatus::finalized) fail(ErrorCode::SessionClosed, "session is finalized");
  if (s.status == SessionStatus::awaiting_merge) {
    fail(ErrorCode::MergePending, "the last round has not been merged yet");
  }
}

void apply_created(SessionState& s, const json& ev) {
  if (!s.session_id.empty()) fail(ErrorCode::InvalidArgument, "session already created");
  s.session_id = ev.at("session_id").get<std::string>();
  s.image_ref = ev.at("image_ref").get<std::string>();
  s.mode = mode_from_json(ev.at("mode"));
}

void apply_prior(SessionState& s, const json& ev) {
  if (s.mode.kind != ModeKind::cotalk) {
    fail(ErrorCode::InvalidMode, "prior annotations exist only in cotalk sessions");
  }
  require_open(s);
  if (s.rounds.empty() || !s.merged_caption) {
    fail(ErrorCode::NothingToRead, "round 1 has no prior annotation");
  }
  int k = ev.at("round_index").get<int>();
  if (k != static_cast<int>(s.rounds.size()) + 1) {
    fail(ErrorCode::OutOfOrderRound, "prior served for the wrong round");
  }
  if (k > s.mode.round_limit()) fail(ErrorCode::RoundLimitReached, "round limit reached");
  s.prior = PriorServed{k, ev.at("annotator_id").get<std::string>(),
                        ev.at("read_start_us").get<std::int64_t>()};
}

void apply_submitted(SessionState& s, const json& ev) {
  require_open(s);
  int k = ev.at("round_index").get<int>();
  int expected = static_cast<int>(s.rounds.size()) + 1;
  if (expected > s.mode.round_limit()) {
    fail(ErrorCode::RoundLimitReached,
         "session accepts at most " + std::to_string(s.mode.round_limit()) + " rounds");
  }
  if (k != expected) {
    fail(ErrorCode::OutOfOrderRound,
         "expected round " + std::to_string(expected) + ", got " + std::to_string(k));
  }
  AnnotationRecord r;
  r.round_index = k;
  r.annotator_id = ev.at("annotator_id").get<std::string>();
  r.payload_kind = parse_payload_kind(ev.at("payload_kind").get<std::string>());
  r.raw_text = ev.at("text").get<std::string>();
  r.audio_ref = ev.value("audio_ref", "");
  RoundTimestamps ts = timestamps_from(ev.at("timestamps"));

  bool reads = s.mode.kind == ModeKind::cotalk && k >= 2;
  if (reads) {
    if (!s.prior || s.prior->round_index != k || s.prior->annotator_id != r.annotator_id) {
      fail(ErrorCode::PriorNotServed,
           "annotator " + r.annotator_id + " has not been served the prior caption");
    }
    if (!ts.read_start || *ts.read_start != s.prior->read_start_us) {
      fail(ErrorCode::NonMonotoneTiming, "read_start must be the time the prior was served");
    }
  } else if (ts.read_start || ts.read_end) {
    fail(ErrorCode::NonMonotoneTiming, "this round has no prior annotation to read");
  }
  s.ledger.record_round(k, ts);
  r.timings = {s.ledger.observe_s(k), s.ledger.read_s(k), s.ledger.output_s(k)};
  s.rounds.push_back(std::move(r));
  s.prior.reset();
  s.status = SessionStatus::awaiting_merge;
}

void apply_processed(SessionState& s, const json& ev) {
  if (s.status != SessionStatus::awaiting_merge || s.rounds.empty()) {
    fail(ErrorCode::InvalidArgument, "no round is awaiting processing");
  }
  AnnotationRecord& r = s.rounds.back();
  if (ev.at("round_index").get<int>() != r.round_index) {
    fail(ErrorCode::OutOfOrderRound, "processed event for the wrong round");
  }
  r.processed = true;
  r.denoised_text = ev.at("denoised_text").get<std::string>();
  r.extracted_units = units_from(ev.at("round_units"));
  if (!ev.at("merged_caption").is_null()) {
    s.merged_caption = ev["merged_caption"].get<std::string>();
    s.merged_tree = semantic::tree_from_state_json(ev.at("merged_tree"));
    s.merged_history.push_back(s.merged_tree);
  }
  s.status = SessionStatus::open;
  s.last_error.reset();
}

void apply_failed(SessionState& s, const json& ev) {
  if (s.status != SessionStatus::awaiting_merge) {
    fail(ErrorCode::InvalidArgument, "gateway failure recorded outside a pending merge");
  }
  s.last_error = ev.at("code").get<std::string>() + ": " + ev.at("message").get<std::string>();
}

void apply_finalized(SessionState& s, const json& ev) {
  require_open(s);
  if (s.rounds.empty()) fail(ErrorCode::EmptySession, "cannot finalize a session without rounds");
  if (s.mode.kind == ModeKind::parallel &&
      (static_cast<int>(s.rounds.size()) < s.mode.parallel_n || !s.merged_caption)) {
    fail(ErrorCode::IncompleteParallelSession,
         "parallel session has " + std::to_string(s.rounds.size()) + " of " +
             std::to_string(s.mode.parallel_n) + " rounds");
  }
  s.finalized_by = ev.at("annotator_id").get<std::string>();
  s.status = SessionStatus::finalized;
  s.prior.reset();
}

}  // namespace

void apply(SessionState& s, const SessionEvent& ev) {
  if (!ev.is_object() || !ev.contains("type") || !ev["type"].is_string()) {
    fail(ErrorCode::InvalidArgument, "event lacks a type");
  }
  const std::string type = ev["type"].get<std::string>();
  if (type != "session_created" && s.session_id.empty()) {
    fail(ErrorCode::InvalidArgument, "event before session_created");
  }
  try {
    if (type == "session_created") apply_created(s, ev);
    else if (type == "prior_served") apply_prior(s, ev);
    else if (type == "round_submitted") apply_submitted(s, ev);
    else if (type == "round_processed") apply_processed(s, ev);
    else if (type == "gateway_failed") apply_failed(s, ev);
    else if (type == "finalized") apply_finalized(s, ev);
    else fail(ErrorCode::InvalidArgument, "unknown event type '" + type + "'");
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, "malformed " + type + " event: " + e.what());
  }
}

// ---- engine -------------------------------------------------------------------

namespace {

void emit(SessionState& s, const SessionEvent& ev, const EventSink& sink) {
  SessionState next = s;
  apply(next, ev);
  if (sink) sink(ev);
  s = std::move(next);
}

}  // namespace

Engine::Engine(std::shared_ptr<gateway::Gateway> gw) : gateway_(std::move(gw)) {
  if (!gateway_) fail(ErrorCode::InvalidArgument, "engine needs a gateway");
}

SessionState Engine::create_session(const std::string& session_id, const std::string& image_ref,
                                    const SessionMode& mode, const EventSink& sink) const {
  mode.validate();
  if (session_id.empty()) fail(ErrorCode::InvalidArgument, "session id must not be empty");
  SessionState s;
  emit(s,
       {{"type", "session_created"},
        {"session_id", session_id},
        {"image_ref", image_ref},
        {"mode", to_json(mode)}},
       sink);
  return s;
}

ServedPrior Engine::serve_prior(SessionState& s, const std::string& annotator_id,
                                std::int64_t now_us, const EventSink& sink) const {
  int k = static_cast<int>(s.rounds.size()) + 1;
  emit(s,
       {{"type", "prior_served"},
        {"round_index", k},
        {"annotator_id", annotator_id},
        {"read_start_us", now_us}},
       sink);
  return {*s.merged_caption, s.session_id + "/r" + std::to_string(k) + "/" + std::to_string(now_us)};
}

void Engine::submit_round(SessionState& s, const RoundSubmission& sub, const EventSink& sink) const {
  RoundTimestamps ts = sub.timestamps;
  if (s.mode.kind == ModeKind::cotalk && sub.round_index >= 2 && s.prior &&
      s.prior->round_index == sub.round_index) {
    ts.read_start = s.prior->read_start_us;
    if (!ts.read_end) ts.read_end = ts.output_start;
  }
  emit(s,
       {{"type", "round_submitted"},
        {"round_index", sub.round_index},
        {"annotator_id", sub.annotator_id},
        {"payload_kind", to_string(sub.payload_kind)},
        {"text", sub.text},
        {"audio_ref", sub.audio_ref},
        {"timestamps", timestamps_json(ts)}},
       sink);
  process(s, sink);
  if (s.mode.kind == ModeKind::single) finalize(s, sub.annotator_id, sink);
}

void Engine::retry_merge(SessionState& s, const EventSink& sink) const {
  if (s.status != SessionStatus::awaiting_merge) {
    fail(ErrorCode::InvalidArgument, "no merge is pending");
  }
  process(s, sink);
  if (s.mode.kind == ModeKind::single) finalize(s, s.rounds.back().annotator_id, sink);
}

void Engine::process(SessionState& s, const EventSink& sink) const {
  const AnnotationRecord& r = s.rounds.back();
  gateway::Gateway& gw = *gateway_;
  json ev = {{"type", "round_processed"}, {"round_index", r.round_index}};
  try {
    std::string denoised = gw.denoise(r.raw_text);
    std::vector<SemanticUnit> round_units;
    if (!text::trim(denoised).empty()) round_units = gw.extract_units(denoised, r.round_index);

    std::optional<std::string> merged;
    switch (s.mode.kind) {
      case ModeKind::single:
        merged = denoised;
        break;
      case ModeKind::cotalk:
        if (r.round_index == 1) {
          merged = denoised;
        } else {
          std::vector<std::string> pair{*s.merged_caption, denoised};
          merged = gw.merge_captions(gateway::MergeMode::sequential, pair);
        }
        break;
      case ModeKind::parallel:
        if (r.round_index == s.mode.parallel_n) {
          std::vector<std::string> all;
          for (std::size_t i = 0; i + 1 < s.rounds.size(); ++i) all.push_back(s.rounds[i].denoised_text);
          all.push_back(denoised);
          merged = gw.merge_captions(gateway::MergeMode::parallel, all);
        }
        break;
    }
    ev["denoised_text"] = denoised;
    ev["round_units"] = units_json(round_units);
    ev["merged_caption"] = nullptr;
    ev["merged_tree"] = nullptr;
    if (merged) {
      std::vector<SemanticUnit> merged_units;
      if (*merged == denoised) {
        merged_units = round_units;
      } else if (!text::trim(*merged).empty()) {
        merged_units = gw.extract_units(*merged, r.round_index);
      }
      // Units keep the round that first introduced them.
      std::vector<SemanticUnit> tagged;
      for (SemanticUnit u : semantic::build_tree(merged_units).units()) {
        u.source_round = r.round_index;
        for (const SemanticUnitTree& h : s.merged_history) {
          if (!h.contains(u.identity())) continue;
          for (const SemanticUnit& prev : h.units()) {
            if (prev.identity() == u.identity()) u.source_round = prev.source_round;
          }
          break;
        }
        tagged.push_back(std::move(u));
      }
      ev["merged_caption"] = *merged;
      ev["merged_tree"] = semantic::to_state_json(semantic::build_tree(tagged));
    }
  } catch (const Error& e) {
    emit(s,
         {{"type", "gateway_failed"},
          {"round_index", r.round_index},
          {"code", to_string(e.code())},
          {"message", e.what()}},
         sink);
    throw Error(ErrorCode::GatewayFailure,
                "round " + std::to_string(s.rounds.back().round_index) +
                    " stored; merge failed: " + e.what());
  }
  emit(s, ev, sink);
}

void Engine::finalize(SessionState& s, const std::string& annotator_id, const EventSink& sink) const {
  emit(s, {{"type", "finalized"}, {"annotator_id", annotator_id}}, sink);
}

// ---- derived metrics ----------------------------------------------------------

double total_time(const SessionState& s) {
  return s.ledger.total_s(static_cast<int>(s.rounds.size()));
}

std::vector<double> round_duplication(const SessionState& s,
                                      const metrics::DuplicationMatcher& matcher) {
  std::vector<double> out;
  for (std::size_t k = 1; k < s.rounds.size(); ++k) {
    if (!s.rounds[k].processed) break;
    SemanticUnitTree earlier;
    if (s.mode.kind == ModeKind::cotalk) {
      if (k - 1 >= s.merged_history.size()) break;
      earlier = s.merged_history[k - 1];
    } else {
      std::vector<SemanticUnit> prior_units;
      for (std::size_t i = 0; i < k; ++i) {
        prior_units.insert(prior_units.end(), s.rounds[i].extracted_units.begin(),
                           s.rounds[i].extracted_units.end());
      }
      earlier = semantic::build_tree(prior_units);
    }
    SemanticUnitTree later = semantic::build_tree(s.rounds[k].extracted_units);
    out.push_back(metrics::duplication_rate(earlier, later, matcher));
  }
  return out;
}

metrics::IntrinsicReport intrinsic_report(const SessionState& s,
                                          const metrics::DuplicationMatcher& matcher) {
  if (s.status != SessionStatus::finalized) {
    fail(ErrorCode::SessionNotFinalized, "session " + s.session_id + " is not finalized");
  }
  std::vector<double> dup = round_duplication(s, matcher);
  return metrics::make_intrinsic_report(semantic::unit_count(s.merged_tree), total_time(s), dup);
}

}  // namespace cotalk::chain
