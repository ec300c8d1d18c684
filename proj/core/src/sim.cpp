#include "cotalk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "cotalk/error.hpp"
#include "cotalk/metrics.hpp"

namespace cotalk::sim {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidScenario, msg); }

// Portable uniform integer in [0, bound): rejection on the raw 64-bit output,
// so results match across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draws `k` distinct elements of `pool` (partial Fisher-Yates, in place).
std::vector<int> sample(std::vector<int>& pool, int k, std::mt19937_64& rng) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  auto n = pool.size();
  for (int i = 0; i < k; ++i) {
    auto j = static_cast<std::size_t>(i) + uniform_below(rng, n - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

double wps(double wpm) { return wpm / 60.0; }

}  // namespace

// ---- scenario -----------------------------------------------------------------

void SimScenario::validate() const {
  if (n_units < 1) invalid("n_units must be >= 1");
  if (annotator_capacity.empty()) invalid("annotator_capacity must not be empty");
  for (int c : annotator_capacity) {
    if (c < 0) invalid("annotator capacities must be >= 0");
  }
  if (annotator_capacity.front() > n_units) invalid("c_1 exceeds n_units");
  if (!(diminish_factor >= 0.0 && diminish_factor <= 1.0)) invalid("diminish_factor must lie in [0, 1]");
  if (!(words_per_unit > 0.0)) invalid("words_per_unit must be > 0");
  if (!(v_talk > 0.0) || !(v_type > 0.0) || !(v_read > 0.0)) invalid("speeds must be > 0");
  if (!(t_observe_image >= 0.0)) invalid("t_observe_image must be >= 0");
  if (parallel_overlap_model && !(*parallel_overlap_model >= 0.0 && *parallel_overlap_model <= 1.0)) {
    invalid("parallel_overlap_model must lie in [0, 1]");
  }
  if (beta < 0.0 || gamma < 0.0) invalid("beta and gamma must be >= 0");
}

int SimScenario::capacity(int round) const {
  if (round < 1) invalid("rounds are 1-based");
  auto idx = static_cast<std::size_t>(round - 1);
  if (idx < annotator_capacity.size()) return annotator_capacity[idx];
  double c = annotator_capacity.back();
  for (std::size_t i = annotator_capacity.size(); i <= idx; ++i) c = std::floor(c * diminish_factor);
  return static_cast<int>(c);
}

SimScenario SimScenario::calibrated() {
  SimScenario s;
  s.n_units = 38;
  s.annotator_capacity = {26, 11};
  s.diminish_factor = 11.0 / 26.0;
  s.baseline_output = OutputChannel::type;
  s.t_observe_image = 217.0;
  return s;
}

json to_json(const SimScenario& s) {
  return {{"n_units", s.n_units},
          {"annotator_capacity", s.annotator_capacity},
          {"diminish_factor", s.diminish_factor},
          {"words_per_unit", s.words_per_unit},
          {"v_talk", s.v_talk},
          {"v_type", s.v_type},
          {"v_read", s.v_read},
          {"t_observe_image", s.t_observe_image},
          {"baseline_output", s.baseline_output == OutputChannel::talk ? "talk" : "type"},
          {"parallel_overlap_model",
           s.parallel_overlap_model ? json(*s.parallel_overlap_model) : json(nullptr)},
          {"beta", s.beta},
          {"gamma", s.gamma},
          {"rng_seed", s.rng_seed}};
}

SimScenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) invalid("scenario must be a JSON object");
  SimScenario s;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "n_units") s.n_units = v.get<int>();
      else if (key == "annotator_capacity") s.annotator_capacity = v.get<std::vector<int>>();
      else if (key == "diminish_factor") s.diminish_factor = v.get<double>();
      else if (key == "words_per_unit") s.words_per_unit = v.get<double>();
      else if (key == "v_talk") s.v_talk = v.get<double>();
      else if (key == "v_type") s.v_type = v.get<double>();
      else if (key == "v_read") s.v_read = v.get<double>();
      else if (key == "t_observe_image") s.t_observe_image = v.get<double>();
      else if (key == "baseline_output") {
        auto o = v.get<std::string>();
        if (o == "talk") s.baseline_output = OutputChannel::talk;
        else if (o == "type") s.baseline_output = OutputChannel::type;
        else invalid("baseline_output must be talk or type");
      } else if (key == "parallel_overlap_model") {
        if (v.is_null()) s.parallel_overlap_model.reset();
        else s.parallel_overlap_model = v.get<double>();
      } else if (key == "beta") s.beta = v.get<double>();
      else if (key == "gamma") s.gamma = v.get<double>();
      else if (key == "rng_seed") s.rng_seed = v.get<std::uint64_t>();
      else invalid("unknown scenario field '" + key + "'");
    }
  } catch (const json::exception& e) {
    invalid(std::string("bad scenario value: ") + e.what());
  }
  s.validate();
  return s;
}

std::string Strategy::label() const {
  switch (kind) {
    case StrategyKind::single: return "single";
    case StrategyKind::parallel: return "parallel(" + std::to_string(rounds) + ")";
    case StrategyKind::cotalk: return "cotalk(" + std::to_string(rounds) + ")";
  }
  return "unknown";
}

Strategy Strategy::parse(const std::string& label) {
  if (label == "single") return single();
  auto open = label.find('(');
  auto close = label.find(')');
  if (open == std::string::npos || close != label.size() - 1) invalid("bad strategy '" + label + "'");
  std::string name = label.substr(0, open);
  int n = 0;
  try {
    n = std::stoi(label.substr(open + 1, close - open - 1));
  } catch (const std::exception&) {
    invalid("bad strategy rounds in '" + label + "'");
  }
  if (n < 1) invalid("strategy rounds must be >= 1");
  if (name == "parallel") return parallel(n);
  if (name == "cotalk") return cotalk(n);
  invalid("unknown strategy '" + name + "'");
}

// ---- simulation ---------------------------------------------------------------

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SimOutcome simulate_trial(const SimScenario& s, const Strategy& strategy, std::uint64_t seed) {
  s.validate();
  if (strategy.rounds < 1) invalid("strategy needs at least one round");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(s.n_units);
  std::vector<char> covered(n, 0);
  int covered_count = 0;
  SimOutcome o;
  o.strategy = strategy;

  const int rounds = strategy.kind == StrategyKind::single ? 1 : strategy.rounds;
  const double w = s.words_per_unit;
  double time = rounds * s.t_observe_image;
  std::vector<double> dup;

  if (strategy.kind == StrategyKind::cotalk) {
    std::vector<int> residual(n);
    std::iota(residual.begin(), residual.end(), 0);
    for (int k = 1; k <= rounds; ++k) {
      if (k >= 2) time += covered_count * w / wps(s.v_read);
      int take = std::min(s.capacity(k), static_cast<int>(residual.size()));
      std::vector<int> drawn = sample(residual, take, rng);
      residual.erase(residual.begin(), residual.begin() + take);
      for (int u : drawn) covered[static_cast<std::size_t>(u)] = 1;
      covered_count += take;
      time += take * w / wps(s.v_talk);
      o.round_units.push_back(take);
      o.delta_i.push_back(take);
      if (k >= 2) dup.push_back(0.0);
    }
  } else {
    const int c1 = s.capacity(1);
    std::vector<int> pool(n);
    for (int k = 1; k <= rounds; ++k) {
      std::vector<int> drawn;
      if (s.parallel_overlap_model) {
        for (std::size_t u = 0; u < n; ++u) {
          if (uniform01(rng) < *s.parallel_overlap_model) drawn.push_back(static_cast<int>(u));
        }
      } else {
        std::iota(pool.begin(), pool.end(), 0);
        drawn = sample(pool, c1, rng);
      }
      int fresh = 0;
      for (int u : drawn) {
        char& c = covered[static_cast<std::size_t>(u)];
        if (!c) ++fresh;
        c = 1;
      }
      if (k >= 2 && !drawn.empty()) {
        dup.push_back(100.0 * static_cast<double>(drawn.size() - static_cast<std::size_t>(fresh)) /
                      static_cast<double>(drawn.size()));
      } else if (k >= 2) {
        dup.push_back(0.0);
      }
      covered_count += fresh;
      time += static_cast<double>(drawn.size()) * w / wps(s.baseline_wpm());
      o.round_units.push_back(static_cast<int>(drawn.size()));
      o.delta_i.push_back(fresh);
    }
  }

  o.covered_units = covered_count;
  o.total_time_s = time;
  o.duplication_pct = dup.empty() ? 0.0 : std::accumulate(dup.begin(), dup.end(), 0.0) / dup.size();
  o.speed = time > 0.0 ? covered_count / time : 0.0;
  const double merged_words = covered_count * w;
  o.j = covered_count - s.beta * merged_words * metrics::kBitsPerWord;
  o.e = time > 0.0 ? o.j / time : 0.0;
  o.z.resize(n);
  for (std::size_t u = 0; u < n; ++u) o.z[u] = covered[u] ? 0 : -1;
  return o;
}

SimOutcome simulate_strategy(const SimScenario& s, const Strategy& strategy) {
  return simulate_trial(s, strategy, trial_seed(s.rng_seed, 0));
}

std::vector<int> info_gain_trace(const SimScenario& s, const Strategy& strategy) {
  return simulate_strategy(s, strategy).delta_i;
}

TrialSummary simulate_trials(const SimScenario& s, const Strategy& strategy, int trials,
                             int threads) {
  s.validate();
  if (trials < 1) invalid("trials must be >= 1");
  std::vector<SimOutcome> outcomes(static_cast<std::size_t>(trials));
  threads = std::clamp(threads, 1, trials);
  auto work = [&](int t0) {
    for (int t = t0; t < trials; t += threads) {
      outcomes[static_cast<std::size_t>(t)] =
          simulate_trial(s, strategy, trial_seed(s.rng_seed, static_cast<std::uint64_t>(t)));
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  TrialSummary sum;
  sum.strategy = strategy;
  sum.trials = trials;
  const std::size_t rounds = outcomes.front().delta_i.size();
  sum.mean_delta_i.assign(rounds, 0.0);
  sum.var_delta_i.assign(rounds, 0.0);
  for (const SimOutcome& o : outcomes) {
    sum.mean_covered += o.covered_units;
    sum.mean_time_s += o.total_time_s;
    sum.mean_duplication_pct += o.duplication_pct;
    sum.mean_speed += o.speed;
    sum.mean_j += o.j;
    sum.mean_e += o.e;
    for (std::size_t k = 0; k < rounds; ++k) sum.mean_delta_i[k] += o.delta_i[k];
  }
  const double nt = trials;
  sum.mean_covered /= nt;
  sum.mean_time_s /= nt;
  sum.mean_duplication_pct /= nt;
  sum.mean_speed /= nt;
  sum.mean_j /= nt;
  sum.mean_e /= nt;
  for (double& m : sum.mean_delta_i) m /= nt;
  if (trials > 1) {
    for (const SimOutcome& o : outcomes) {
      for (std::size_t k = 0; k < rounds; ++k) {
        double d = o.delta_i[k] - sum.mean_delta_i[k];
        sum.var_delta_i[k] += d * d;
      }
    }
    for (double& v : sum.var_delta_i) v /= nt - 1.0;
  }
  return sum;
}

// ---- closed form ----------------------------------------------------------------

DeltaTReport delta_t(const SimScenario& s, int n, int m, PremiseCheck check) {
  s.validate();
  if (n < 1 || m < 1) invalid("n and m must be >= 1");
  DeltaTReport r;
  if (!(s.capacity(2) < s.capacity(1))) r.violations.push_back("c_2 < c_1");
  if (!(s.v_read > s.v_talk)) r.violations.push_back("v_read > v_talk");
  if (!(m > n && n >= 2)) r.violations.push_back("m > n >= 2");
  if (!(s.t_observe_image >= 0.0)) r.violations.push_back("t_observe >= 0");
  r.premise_holds = r.violations.empty();
  if (!r.premise_holds && check == PremiseCheck::strict) {
    std::string msg = "premise violated:";
    for (const auto& v : r.violations) msg += " " + v + ";";
    throw Error(ErrorCode::PremiseViolation, msg);
  }

  const double w = s.words_per_unit;
  const int c1 = s.capacity(1);
  r.t_parallel = m * s.t_observe_image + m * c1 * w / wps(s.baseline_wpm());

  double t = n * s.t_observe_image;
  int covered = 0;
  for (int k = 1; k <= n; ++k) {
    if (k >= 2) t += covered * w / wps(s.v_read);
    int take = std::min(s.capacity(k), s.n_units - covered);
    t += take * w / wps(s.v_talk);
    covered += take;
  }
  r.t_cotalk = t;
  r.delta_t = r.t_parallel - r.t_cotalk;
  return r;
}

// ---- sweep ----------------------------------------------------------------------

std::vector<ParetoRow> pareto_sweep(const std::vector<SimScenario>& grid,
                                    const std::vector<Strategy>& strategies, int trials,
                                    int threads) {
  std::vector<ParetoRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t first = rows.size();
    for (const Strategy& st : strategies) {
      TrialSummary t = simulate_trials(grid[i], st, trials, threads);
      rows.push_back({i, st, t.mean_j, t.mean_time_s, t.mean_e, t.mean_speed,
                      t.mean_duplication_pct, false});
    }
    for (std::size_t a = first; a < rows.size(); ++a) {
      for (std::size_t b = first; b < rows.size(); ++b) {
        if (a == b) continue;
        const ParetoRow& x = rows[a];
        const ParetoRow& y = rows[b];
        if (y.j >= x.j && y.t <= x.t && (y.j > x.j || y.t < x.t)) rows[a].dominated = true;
      }
    }
  }
  return rows;
}

// ---- json -----------------------------------------------------------------------

json to_json(const SimOutcome& o) {
  return {{"strategy", o.strategy.label()},
          {"covered_units", o.covered_units},
          {"total_time_s", o.total_time_s},
          {"duplication_pct", o.duplication_pct},
          {"speed_units_per_s", o.speed},
          {"J", o.j},
          {"E", o.e},
          {"round_units", o.round_units},
          {"delta_i", o.delta_i},
          {"z", o.z}};
}

json to_json(const TrialSummary& t) {
  return {{"strategy", t.strategy.label()},
          {"trials", t.trials},
          {"mean_covered_units", t.mean_covered},
          {"mean_total_time_s", t.mean_time_s},
          {"mean_duplication_pct", t.mean_duplication_pct},
          {"mean_speed_units_per_s", t.mean_speed},
          {"mean_J", t.mean_j},
          {"mean_E", t.mean_e},
          {"mean_delta_i", t.mean_delta_i},
          {"var_delta_i", t.var_delta_i}};
}

json to_json(const DeltaTReport& r) {
  return {{"delta_t_s", r.delta_t},
          {"t_parallel_s", r.t_parallel},
          {"t_cotalk_s", r.t_cotalk},
          {"premise_holds", r.premise_holds},
          {"violations", r.violations}};
}

}  // namespace cotalk::sim
