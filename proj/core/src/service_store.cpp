#include <cstdio>
#include <sstream>

#include "cotalk/error.hpp"
#include "cotalk/hash.hpp"
#include "cotalk/service.hpp"

namespace cotalk::service {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- replay -------------------------------------------------------------------

ReplayResult replay_stream(std::istream& log, const json* snapshot) {
  ReplayResult r;
  if (snapshot) {
    r.last_seq = snapshot->at("seq").get<std::uint64_t>();
    for (const json& s : snapshot->at("sessions")) {
      chain::SessionState st = chain::session_from_json(s);
      std::string id = st.session_id;
      r.sessions.emplace(std::move(id), std::move(st));
    }
    r.used_snapshot = true;
  }
  const std::uint64_t snapshot_seq = r.last_seq;
  std::uint64_t expected = 1;
  std::string line;
  std::size_t line_no = 0;
  auto corrupt = [&](const std::string& detail) {
    r.corrupt_line = line_no;
    r.corrupt_detail = detail;
  };
  while (std::getline(log, line)) {
    ++line_no;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      corrupt(std::string("unparseable record: ") + e.what());
      return r;
    }
    if (!rec.is_object() || !rec.contains("seq") || !rec["seq"].is_number_unsigned() ||
        !rec.contains("session_id") || !rec["session_id"].is_string() || !rec.contains("event")) {
      corrupt("record lacks seq, session_id or event");
      return r;
    }
    auto seq = rec["seq"].get<std::uint64_t>();
    if (seq != expected) {
      corrupt("sequence gap: expected " + std::to_string(expected) + ", found " + std::to_string(seq));
      return r;
    }
    ++expected;
    if (seq <= snapshot_seq) continue;
    const std::string id = rec["session_id"].get<std::string>();
    const json& ev = rec["event"];
    bool creates = ev.is_object() && ev.value("type", "") == "session_created";
    auto it = r.sessions.find(id);
    if (creates == (it != r.sessions.end())) {
      corrupt(creates ? "session created twice" : "event for unknown session " + id);
      return r;
    }
    chain::SessionState next = creates ? chain::SessionState{} : it->second;
    try {
      chain::apply(next, ev);
    } catch (const Error& e) {
      corrupt(std::string(to_string(e.code())) + ": " + e.what());
      return r;
    }
    if (next.session_id != id) {
      corrupt("event session id does not match its record");
      return r;
    }
    r.sessions[id] = std::move(next);
    r.last_seq = seq;
    ++r.events_applied;
  }
  if (snapshot && expected - 1 < snapshot_seq) {
    corrupt("log is shorter than the snapshot");
  }
  return r;
}

ReplayResult replay_directory(const fs::path& dir, bool use_snapshot) {
  json snap;
  bool have_snap = false;
  if (use_snapshot && fs::exists(dir / kSnapshotName)) {
    std::ifstream in(dir / kSnapshotName);
    try {
      snap = json::parse(in);
      have_snap = true;
    } catch (const json::exception&) {
      have_snap = false;  // a torn snapshot is ignored; the log is authoritative
    }
  }
  std::ifstream log(dir / kEventLogName);
  if (!log) {
    ReplayResult empty;
    if (have_snap) {
      empty.corrupt_line = 0;
      empty.corrupt_detail = "snapshot without event log";
    }
    return empty;
  }
  return replay_stream(log, have_snap ? &snap : nullptr);
}

SessionMap replay_or_throw(const fs::path& dir, bool use_snapshot) {
  ReplayResult r = replay_directory(dir, use_snapshot);
  if (r.corrupt_line) throw CorruptLogError(*r.corrupt_line, r.corrupt_detail);
  return std::move(r.sessions);
}

std::string store_hash(const SessionMap& sessions) {
  std::string acc;
  for (const auto& [id, s] : sessions) acc += id + ":" + chain::state_hash(s) + "\n";
  return sha256_hex(acc);
}

// ---- event log ----------------------------------------------------------------

EventLog::EventLog(fs::path dir, const ReplayResult& recovered, Options options)
    : dir_(std::move(dir)), options_(std::move(options)), seq_(recovered.last_seq),
      shadow_(recovered.sessions) {
  fs::create_directories(dir_);
  out_.open(dir_ / kEventLogName, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorCode::Io, "cannot open event log in " + dir_.string());
}

std::uint64_t EventLog::append(const std::string& session_id, const chain::SessionEvent& event) {
  std::lock_guard lock(mu_);
  chain::SessionState next = shadow_.count(session_id) ? shadow_[session_id] : chain::SessionState{};
  chain::apply(next, event);
  const std::uint64_t seq = seq_ + 1;
  json rec = {{"seq", seq}, {"session_id", session_id}, {"event", event}};
  out_ << rec.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "event log write failed");
  seq_ = seq;
  shadow_[session_id] = std::move(next);
  if (options_.snapshot_every > 0 && seq_ % static_cast<std::uint64_t>(options_.snapshot_every) == 0) {
    write_snapshot_locked();
  }
  if (options_.after_append) options_.after_append(seq);
  return seq;
}

SessionMap EventLog::snapshot_sessions() const {
  std::lock_guard lock(mu_);
  return shadow_;
}

void EventLog::write_snapshot() {
  std::lock_guard lock(mu_);
  write_snapshot_locked();
}

void EventLog::write_snapshot_locked() {
  json sessions = json::array();
  for (const auto& [id, s] : shadow_) sessions.push_back(chain::to_json(s));
  json doc = {{"format", 1}, {"seq", seq_}, {"sessions", sessions}};
  fs::path tmp = dir_ / (std::string(kSnapshotName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << doc.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "snapshot write failed");
  }
  fs::rename(tmp, dir_ / kSnapshotName);
}

// ---- store --------------------------------------------------------------------

SessionStore::SessionStore(fs::path dir, std::shared_ptr<chain::Engine> engine,
                           metrics::DuplicationMatcher matcher, StoreOptions options)
    : dir_(std::move(dir)), engine_(std::move(engine)), matcher_(std::move(matcher)) {
  if (!engine_) throw Error(ErrorCode::InvalidArgument, "store needs an engine");
  ReplayResult r = replay_directory(dir_);
  if (r.corrupt_line) throw CorruptLogError(*r.corrupt_line, r.corrupt_detail);
  std::uint64_t max_id = 0;
  for (const auto& [id, s] : r.sessions) {
    auto e = std::make_shared<Entry>();
    e->state = s;
    sessions_.emplace(id, std::move(e));
    if (id.size() > 1 && id[0] == 's') {
      try {
        max_id = std::max<std::uint64_t>(max_id, std::stoull(id.substr(1)));
      } catch (const std::exception&) {
      }
    }
  }
  next_id_ = max_id + 1;
  log_ = std::make_unique<EventLog>(dir_, r, options.log);
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(map_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
  return it->second;
}

chain::EventSink SessionStore::sink_for(const std::string& id) {
  return [this, id](const chain::SessionEvent& ev) { log_->append(id, ev); };
}

template <typename Fn>
chain::SessionState SessionStore::mutate(const std::string& id, Fn&& fn) {
  auto entry = find(id);
  std::lock_guard lock(entry->mu);
  fn(entry->state, sink_for(id));
  return entry->state;
}

std::string SessionStore::create(const std::string& image_ref, const chain::SessionMode& mode) {
  mode.validate();
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%08llu", static_cast<unsigned long long>(next_id_++));
  std::string id = buf;
  auto entry = std::make_shared<Entry>();
  std::lock_guard entry_lock(entry->mu);
  {
    std::unique_lock lock(map_mu_);
    sessions_.emplace(id, entry);
  }
  try {
    entry->state = engine_->create_session(id, image_ref, mode, sink_for(id));
  } catch (...) {
    std::unique_lock lock(map_mu_);
    sessions_.erase(id);
    throw;
  }
  return id;
}

chain::SessionState SessionStore::get(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mu);
  return entry->state;
}

chain::ServedPrior SessionStore::serve_prior(const std::string& id, const std::string& annotator_id,
                                             std::int64_t now_us) {
  chain::ServedPrior out;
  mutate(id, [&](chain::SessionState& s, const chain::EventSink& sink) {
    out = engine_->serve_prior(s, annotator_id, now_us, sink);
  });
  return out;
}

chain::SessionState SessionStore::submit_round(const std::string& id,
                                               const chain::RoundSubmission& sub) {
  return mutate(id, [&](chain::SessionState& s, const chain::EventSink& sink) {
    engine_->submit_round(s, sub, sink);
  });
}

chain::SessionState SessionStore::retry_merge(const std::string& id) {
  return mutate(id, [&](chain::SessionState& s, const chain::EventSink& sink) {
    engine_->retry_merge(s, sink);
  });
}

chain::SessionState SessionStore::finalize(const std::string& id, const std::string& annotator_id) {
  return mutate(id, [&](chain::SessionState& s, const chain::EventSink& sink) {
    engine_->finalize(s, annotator_id, sink);
  });
}

metrics::IntrinsicReport SessionStore::report(const std::string& id) const {
  return chain::intrinsic_report(get(id), matcher_);
}

std::vector<chain::SessionState> SessionStore::finalized(
    const std::optional<std::string>& mode_label) const {
  std::vector<chain::SessionState> out;
  for (auto& [id, s] : log_->snapshot_sessions()) {
    if (s.status != chain::SessionStatus::finalized) continue;
    if (mode_label && s.mode.label() != *mode_label) continue;
    out.push_back(s);
  }
  return out;
}

SessionMap SessionStore::all() const { return log_->snapshot_sessions(); }

// ---- export -------------------------------------------------------------------

json export_record(const chain::SessionState& s) {
  return {{"session_id", s.session_id},
          {"image_ref", s.image_ref},
          {"mode", s.mode.label()},
          {"merged_caption", s.merged_caption.value_or("")},
          {"merged_tree", semantic::to_extraction_json(s.merged_tree)},
          {"unit_count", semantic::unit_count(s.merged_tree)},
          {"total_time_s", chain::total_time(s)}};
}

std::string export_jsonl(const std::vector<chain::SessionState>& sessions) {
  std::vector<const chain::SessionState*> sorted;
  for (const auto& s : sessions) {
    if (s.status == chain::SessionStatus::finalized) sorted.push_back(&s);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->session_id < b->session_id; });
  std::string out;
  for (const auto* s : sorted) out += export_record(*s).dump() + "\n";
  return out;
}

std::string export_metrics_csv(const std::vector<chain::SessionState>& sessions,
                               const metrics::DuplicationMatcher& matcher) {
  std::vector<metrics::MetricsRow> rows;
  for (const auto& s : sessions) {
    if (s.status != chain::SessionStatus::finalized) continue;
    metrics::IntrinsicReport r = chain::intrinsic_report(s, matcher);
    rows.push_back({s.session_id, std::string(s.mode.label()), r.unit_count, r.total_time_s, r.speed,
                    r.duplication_pct, std::nullopt, std::nullopt});
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  std::ostringstream out;
  metrics::write_metrics_csv(out, rows);
  return out.str();
}

}  // namespace cotalk::service
