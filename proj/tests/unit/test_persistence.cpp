#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/service.hpp"
#include "test_support.hpp"

using namespace cotalk;
using namespace cotalk::service;
using cotalk::test_support::TempDir;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kSec = 1'000'000;

struct Crash : std::runtime_error {
  Crash() : std::runtime_error("crash") {}
};

std::shared_ptr<chain::Engine> mock_engine() {
  return std::make_shared<chain::Engine>(gateway::Gateway::make_mock());
}

std::unique_ptr<SessionStore> open_store(const fs::path& dir, EventLog::Options log = {}) {
  StoreOptions o;
  o.log = std::move(log);
  return std::make_unique<SessionStore>(dir, mock_engine(), metrics::DuplicationMatcher::exact(), o);
}

chain::RoundSubmission sub(int k, const std::string& who, const std::string& text, std::int64_t t0) {
  chain::RoundSubmission s;
  s.round_index = k;
  s.annotator_id = who;
  s.text = text;
  s.timestamps.observe_start = t0;
  s.timestamps.observe_end = t0 + 5 * kSec;
  s.timestamps.output_start = t0 + 10 * kSec;
  s.timestamps.output_end = t0 + 20 * kSec;
  return s;
}

// A fixed workload over three sessions; stops early when the store throws.
void workload(SessionStore& store) {
  auto c = store.create("img-1", chain::SessionMode::cotalk());
  auto p = store.create("img-2", chain::SessionMode::parallel(2));
  auto s = store.create("img-3", chain::SessionMode::single());
  store.submit_round(c, sub(1, "a1", "a black car on a road.", 0));
  store.submit_round(p, sub(1, "b1", "a red house.", 0));
  store.serve_prior(c, "a2", 105 * kSec);
  store.submit_round(c, sub(2, "a2", "two trees left of the car.", 100 * kSec));
  store.submit_round(s, sub(1, "c1", "a small dog.", 0));
  store.submit_round(p, sub(2, "b2", "a red house. many birds in the sky.", 0));
  store.serve_prior(c, "a3", 205 * kSec);
  store.submit_round(c, sub(3, "a3", "a wooden bench.", 200 * kSec));
  store.finalize(c, "a3");
  store.finalize(p, "b2");
}

std::vector<std::string> log_lines(const fs::path& dir) {
  std::ifstream in(dir / kEventLogName);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Replay, EmptyDirectory) {
  TempDir dir;
  auto r = replay_directory(dir.path());
  EXPECT_TRUE(r.sessions.empty());
  EXPECT_FALSE(r.corrupt_line.has_value());
  auto store = open_store(dir.path());
  EXPECT_TRUE(store->all().empty());
}

TEST(Replay, RoundTripMatchesLiveState) {
  TempDir dir;
  SessionMap live;
  {
    auto store = open_store(dir.path());
    workload(*store);
    live = store->all();
    for (auto& [id, s] : live) EXPECT_EQ(store->get(id), s);
  }
  auto replayed = replay_or_throw(dir.path(), false);
  EXPECT_EQ(store_hash(replayed), store_hash(live));
  EXPECT_EQ(replayed, live);
  auto reopened = open_store(dir.path());
  EXPECT_EQ(store_hash(reopened->all()), store_hash(live));
  // Ids continue after the recovered ones.
  EXPECT_EQ(reopened->create("img-4", chain::SessionMode::single()), "s00000004");
}

TEST(Replay, SnapshotEquivalence) {
  TempDir dir;
  EventLog::Options o;
  o.snapshot_every = 4;
  {
    auto store = open_store(dir.path(), o);
    workload(*store);
  }
  ASSERT_TRUE(fs::exists(dir.path() / kSnapshotName));
  auto with = replay_directory(dir.path(), true);
  auto without = replay_directory(dir.path(), false);
  EXPECT_TRUE(with.used_snapshot);
  EXPECT_FALSE(with.corrupt_line.has_value());
  EXPECT_LT(with.events_applied, without.events_applied);
  EXPECT_EQ(store_hash(with.sessions), store_hash(without.sessions));
  EXPECT_EQ(with.last_seq, without.last_seq);
}

TEST(Replay, TornSnapshotIsIgnored) {
  TempDir dir;
  {
    auto store = open_store(dir.path());
    workload(*store);
  }
  std::ofstream(dir.path() / kSnapshotName) << R"({"format": 1, "seq": 3, "sess)";
  auto r = replay_directory(dir.path());
  EXPECT_FALSE(r.used_snapshot);
  EXPECT_FALSE(r.corrupt_line.has_value());
}

TEST(Replay, TruncatedLastLine) {
  TempDir dir;
  {
    auto store = open_store(dir.path());
    workload(*store);
  }
  auto lines = log_lines(dir.path());
  ASSERT_GT(lines.size(), 5u);
  // Reference: the state after every complete line but the last.
  std::ostringstream prefix;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) prefix << lines[i] << '\n';
  std::istringstream prefix_in(prefix.str());
  auto reference = replay_stream(prefix_in);

  {
    std::ofstream out(dir.path() / kEventLogName, std::ios::trunc);
    out << prefix.str() << lines.back().substr(0, lines.back().size() / 2);
  }
  auto r = replay_directory(dir.path());
  ASSERT_TRUE(r.corrupt_line.has_value());
  EXPECT_EQ(*r.corrupt_line, lines.size());
  EXPECT_EQ(store_hash(r.sessions), store_hash(reference.sessions));
  try {
    open_store(dir.path());
    FAIL();
  } catch (const CorruptLogError& e) {
    EXPECT_EQ(e.line(), lines.size());
    EXPECT_EQ(e.code(), ErrorCode::CorruptLog);
  }
}

TEST(Replay, RejectsInconsistentRecords) {
  auto check = [](const std::string& log, std::size_t line) {
    std::istringstream in(log);
    auto r = replay_stream(in);
    ASSERT_TRUE(r.corrupt_line.has_value()) << log;
    EXPECT_EQ(*r.corrupt_line, line) << r.corrupt_detail;
  };
  const std::string create =
      R"({"seq":1,"session_id":"s1","event":{"type":"session_created","session_id":"s1","image_ref":"i","mode":"cotalk"}})";
  check(create + "\n" + R"({"seq":3,"session_id":"s1","event":{"type":"finalized","annotator_id":"a"}})", 2);
  check(create + "\n" + R"({"seq":2,"session_id":"s9","event":{"type":"finalized","annotator_id":"a"}})", 2);
  check(create + "\n" + R"({"seq":2,"session_id":"s1","event":{"type":"finalized","annotator_id":"a"}})", 2);
  check(create + "\n" + create, 2);
  check("[]", 1);
}

TEST(Replay, FiveEventSession) {
  TempDir dir;
  std::string id;
  chain::SessionState live;
  {
    auto store = open_store(dir.path());
    id = store->create("img", chain::SessionMode::cotalk());
    store->submit_round(id, sub(1, "a1", "a black car.", 0));
    store->serve_prior(id, "a2", 105 * kSec);
    live = store->submit_round(id, sub(2, "a2", "two trees.", 100 * kSec));
  }
  EXPECT_EQ(log_lines(dir.path()).size(), 6u);
  auto replayed = replay_or_throw(dir.path());
  EXPECT_EQ(chain::state_hash(replayed.at(id)), chain::state_hash(live));
}

TEST(Replay, CrashAfterRandomEvent) {
  TempDir ref_dir;
  {
    auto store = open_store(ref_dir.path());
    workload(*store);
  }
  auto ref_lines = log_lines(ref_dir.path());
  std::mt19937_64 rng(23);
  for (int run = 0; run < 20; ++run) {
    TempDir dir;
    const std::uint64_t crash_at = 1 + rng() % ref_lines.size();
    EventLog::Options o;
    o.snapshot_every = 1 + static_cast<int>(rng() % 5);
    o.after_append = [crash_at](std::uint64_t seq) {
      if (seq == crash_at) throw Crash();
    };
    {
      auto store = open_store(dir.path(), o);
      EXPECT_THROW(workload(*store), Crash);
    }
    std::ostringstream prefix;
    for (std::uint64_t i = 0; i < crash_at; ++i) prefix << ref_lines[i] << '\n';
    std::istringstream in(prefix.str());
    auto expected = replay_stream(in);
    auto store = open_store(dir.path());
    EXPECT_EQ(store_hash(store->all()), store_hash(expected.sessions)) << "crash at " << crash_at;
  }
}

TEST(Export, JsonlAndCsv) {
  TempDir dir;
  auto store = open_store(dir.path());
  EXPECT_EQ(export_jsonl(store->finalized()), "");
  workload(*store);
  auto fin = store->finalized();
  ASSERT_EQ(fin.size(), 3u);
  std::istringstream in(export_jsonl(fin));
  std::vector<nlohmann::json> recs;
  for (std::string l; std::getline(in, l);) recs.push_back(nlohmann::json::parse(l));
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0]["session_id"], "s00000001");
  EXPECT_EQ(recs[0]["mode"], "cotalk");
  EXPECT_GT(recs[0]["unit_count"].get<int>(), 0);
  EXPECT_TRUE(recs[0]["merged_tree"].is_array());
  EXPECT_EQ(store->finalized("parallel").size(), 1u);
  auto csv = export_metrics_csv(fin, store->matcher());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), std::string(metrics::kMetricsCsvHeader));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}
