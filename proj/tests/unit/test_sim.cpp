#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cotalk/error.hpp"
#include "cotalk/sim.hpp"

using namespace cotalk;
using namespace cotalk::sim;

namespace {

// Independent recomputation of the round times; speeds in words per minute.
double t_cotalk_oracle(double t_obs, const std::vector<int>& take, double w, double v_read, double v_talk) {
  double t = 0, covered = 0;
  for (std::size_t k = 0; k < take.size(); ++k) {
    t += t_obs;
    if (k > 0) t += covered * w * 60.0 / v_read;
    t += take[k] * w * 60.0 / v_talk;
    covered += take[k];
  }
  return t;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST(Sim, DefaultCotalkTimeExample) {
  SimScenario s;
  auto o = simulate_strategy(s, Strategy::cotalk(2));
  double expected = 2 * 20 + 120 / (236.0 / 60) + (120 + 60) / (161.2 / 60);
  EXPECT_NEAR(o.total_time_s, expected, 1e-9);
  EXPECT_NEAR(o.total_time_s, 137.5, 0.01);
  EXPECT_NEAR(o.total_time_s, t_cotalk_oracle(20, {30, 15}, 4, 236, 161.2), 1e-9);
}

TEST(Sim, CotalkTraceIsCapacity) {
  SimScenario s;
  EXPECT_EQ(info_gain_trace(s, Strategy::cotalk(2)), (std::vector<int>{30, 15}));
  EXPECT_EQ(info_gain_trace(s, Strategy::cotalk(4)), (std::vector<int>{30, 15, 7, 3}));
  auto o = simulate_strategy(s, Strategy::cotalk(3));
  EXPECT_EQ(o.duplication_pct, 0.0);
  EXPECT_EQ(o.covered_units, 52);
  int missed = 0;
  for (int z : o.z) missed += z == -1;
  EXPECT_EQ(missed, 60 - 52);
}

TEST(Sim, CapacityExtension) {
  SimScenario s;
  s.annotator_capacity = {30, 15};
  s.diminish_factor = 0.5;
  EXPECT_EQ(s.capacity(1), 30);
  EXPECT_EQ(s.capacity(3), 7);
  EXPECT_EQ(s.capacity(5), 1);
  EXPECT_EQ(code_of([&] { s.capacity(0); }), ErrorCode::InvalidScenario);
}

TEST(Sim, ParallelInclusionExclusion) {
  SimScenario s;
  s.n_units = 20;
  s.annotator_capacity = {8, 4};
  const double n = 20, c = 8;
  const double expected = 3 * c - 3 * c * c / n + c * c * c / (n * n);
  auto t = simulate_trials(s, Strategy::parallel(3), 20000);
  EXPECT_NEAR(t.mean_covered, expected, 0.05);
  EXPECT_LT(t.mean_covered, 3 * c);
  EXPECT_GT(t.mean_duplication_pct, 0.0);
}

TEST(Sim, ParallelRoundTwoGain) {
  SimScenario s;
  auto t = simulate_trials(s, Strategy::parallel(2), 10000);
  // Hypergeometric: mean 15, variance 30 * 0.5 * 0.5 * 30 / 59.
  const double var = 30 * 0.5 * 0.5 * 30.0 / 59.0;
  EXPECT_NEAR(t.mean_delta_i[1], 15.0, 4 * std::sqrt(var / 10000));
  EXPECT_NEAR(t.var_delta_i[1], var, 0.5);
  EXPECT_GT(t.var_delta_i[1], 0.0);
  EXPECT_DOUBLE_EQ(t.mean_delta_i[0], 30.0);
}

TEST(Sim, OverlapModel) {
  SimScenario s;
  s.parallel_overlap_model = 0.25;
  auto t = simulate_trials(s, Strategy::parallel(2), 5000);
  EXPECT_NEAR(t.mean_delta_i[0], 15.0, 0.2);
  EXPECT_NEAR(t.mean_covered, 60 * (1 - 0.75 * 0.75), 0.3);
}

TEST(Sim, CotalkOneEqualsSingle) {
  SimScenario s;
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    auto a = simulate_trial(s, Strategy::single(), seed);
    auto b = simulate_trial(s, Strategy::cotalk(1), seed);
    EXPECT_EQ(a.covered_units, b.covered_units);
    EXPECT_DOUBLE_EQ(a.total_time_s, b.total_time_s);
    EXPECT_EQ(a.z, b.z);
  }
}

TEST(Sim, Reproducible) {
  SimScenario s;
  EXPECT_EQ(simulate_trial(s, Strategy::parallel(3), 5), simulate_trial(s, Strategy::parallel(3), 5));
  auto one = simulate_trials(s, Strategy::parallel(3), 200, 1);
  auto four = simulate_trials(s, Strategy::parallel(3), 200, 4);
  EXPECT_EQ(one.mean_covered, four.mean_covered);
  EXPECT_EQ(one.mean_delta_i, four.mean_delta_i);
  EXPECT_NE(trial_seed(42, 0), trial_seed(42, 1));
  EXPECT_NE(trial_seed(42, 0), trial_seed(43, 0));
}

TEST(Sim, DeltaTExample) {
  SimScenario s;
  auto r = delta_t(s, 2, 3);
  double expected = 20 + (240 - 60) / (161.2 / 60) - 120 / (236.0 / 60);
  EXPECT_NEAR(r.delta_t, expected, 1e-9);
  EXPECT_NEAR(r.delta_t, 56.5, 0.05);
  EXPECT_TRUE(r.premise_holds);
}

TEST(Sim, DeltaTMatchesSimulatedTimes) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    SimScenario s;
    s.n_units = 40 + static_cast<int>(rng() % 60);
    int c1 = 5 + static_cast<int>(rng() % 30);
    s.annotator_capacity = {c1, static_cast<int>(rng() % c1)};
    s.words_per_unit = 1 + (rng() % 80) / 10.0;
    s.t_observe_image = (rng() % 600) / 10.0;
    int n = 2 + static_cast<int>(rng() % 3);
    int m = n + 1 + static_cast<int>(rng() % 3);
    auto r = delta_t(s, n, m, PremiseCheck::report);
    double sim_diff = simulate_strategy(s, Strategy::parallel(m)).total_time_s -
                      simulate_strategy(s, Strategy::cotalk(n)).total_time_s;
    EXPECT_NEAR(r.delta_t, sim_diff, 1e-9);
  }
}

TEST(Sim, DeltaTPremises) {
  SimScenario s;
  s.annotator_capacity = {30, 30};
  EXPECT_EQ(code_of([&] { delta_t(s, 2, 3); }), ErrorCode::PremiseViolation);
  auto r = delta_t(s, 2, 2, PremiseCheck::report);
  EXPECT_FALSE(r.premise_holds);
  EXPECT_EQ(r.violations.size(), 2u);
  s.t_observe_image = 0;
  s.v_read = s.v_talk;
  EXPECT_NEAR(delta_t(s, 2, 3, PremiseCheck::report).delta_t, 0.0, 1e-9);
}

TEST(Sim, DeltaTPositiveInPremiseRegion) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    SimScenario s;
    s.n_units = 20 + static_cast<int>(rng() % 200);
    int c1 = 1 + static_cast<int>(rng() % static_cast<unsigned>(s.n_units));
    s.annotator_capacity = {c1, static_cast<int>(rng() % static_cast<unsigned>(c1))};
    s.diminish_factor = u(rng);
    s.words_per_unit = 0.5 + 10 * u(rng);
    s.t_observe_image = 100 * u(rng);
    EXPECT_GT(delta_t(s, 2, 3).delta_t, 0.0);
  }
}

TEST(Sim, ParallelDuplicationScalesWithDensity) {
  SimScenario s;
  s.annotator_capacity = {10, 5};
  double last = 101.0;
  for (int n : {20, 40, 80, 160, 640, 5000}) {
    s.n_units = n;
    double d = simulate_trials(s, Strategy::parallel(2), 2000).mean_duplication_pct;
    EXPECT_LT(d, last);
    last = d;
  }
  EXPECT_LT(last, 1.0);
  s.n_units = 100;
  last = -1;
  for (int c : {5, 10, 20, 40, 80}) {
    s.annotator_capacity = {c, c / 2};
    double d = simulate_trials(s, Strategy::parallel(3), 2000).mean_duplication_pct;
    EXPECT_GT(d, last);
    last = d;
  }
}

TEST(Sim, QualityAndEfficiency) {
  SimScenario s;
  s.beta = 0.001;
  auto o = simulate_strategy(s, Strategy::cotalk(2));
  EXPECT_NEAR(o.j, 45 - 0.001 * 45 * 4 * 11.82, 1e-9);
  EXPECT_NEAR(o.e, o.j / o.total_time_s, 1e-12);
}

TEST(Scenario, JsonRoundTripAndValidation) {
  SimScenario s = SimScenario::calibrated();
  s.parallel_overlap_model = 0.3;
  auto back = scenario_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(code_of([] { scenario_from_json({{"bogus", 1}}); }), ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { scenario_from_json({{"n_units", "many"}}); }), ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { scenario_from_json({{"n_units", 5}, {"annotator_capacity", {6}}}); }),
            ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { scenario_from_json({{"diminish_factor", 1.5}}); }), ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { scenario_from_json({{"v_talk", 0}}); }), ErrorCode::InvalidScenario);
}

TEST(Strategy, Labels) {
  for (auto st : {Strategy::single(), Strategy::parallel(3), Strategy::cotalk(2)}) {
    EXPECT_EQ(Strategy::parse(st.label()), st);
  }
  EXPECT_EQ(code_of([] { Strategy::parse("cotalk(0)"); }), ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { Strategy::parse("serial(2)"); }), ErrorCode::InvalidScenario);
  EXPECT_EQ(code_of([] { Strategy::parse("cotalk(2"); }), ErrorCode::InvalidScenario);
}

TEST(Pareto, DominanceFlags) {
  SimScenario s;
  std::vector<SimScenario> grid{s};
  auto rows = pareto_sweep(grid, {Strategy::single(), Strategy::parallel(3), Strategy::cotalk(2)}, 200);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& a : rows) {
    bool dominated = false;
    for (const auto& b : rows) {
      if (b.j >= a.j && b.t <= a.t && (b.j > a.j || b.t < a.t)) dominated = true;
    }
    EXPECT_EQ(a.dominated, dominated) << a.strategy.label();
  }
  // single is the fastest strategy, so nothing dominates it.
  EXPECT_FALSE(rows[0].dominated);
}
