#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotalk::sim {

enum class OutputChannel { talk, type };

inline constexpr double kTalkWpm = 161.2;
inline constexpr double kTypeWpm = 53.46;
inline constexpr double kReadWpm = 236.0;

struct SimScenario {
  int n_units = 60;
  std::vector<int> annotator_capacity{30, 15};
  double diminish_factor = 0.5;  // extends the capacity list: c_{k+1} = floor(c_k * factor)
  double words_per_unit = 4.0;
  double v_talk = kTalkWpm;
  double v_type = kTypeWpm;
  double v_read = kReadWpm;
  double t_observe_image = 20.0;  // seconds per annotator
  /// How single and parallel annotators produce text. CoTalk always talks.
  OutputChannel baseline_output = OutputChannel::talk;
  /// When set, each parallel annotator covers each unit independently with
  /// this probability instead of drawing exactly c_1 units.
  std::optional<double> parallel_overlap_model;
  double beta = 0.0;
  double gamma = 0.0;
  std::uint64_t rng_seed = 42;

  /// Throws InvalidScenario.
  void validate() const;
  /// 1-based round capacity.
  int capacity(int round) const;
  double baseline_wpm() const noexcept {
    return baseline_output == OutputChannel::talk ? v_talk : v_type;
  }

  /// n_units 38, c = [26, 11], typed baselines, t_observe 217 s: fitted to
  /// the reported unit counts, duplication and speed ratio of the human study.
  static SimScenario calibrated();
};

nlohmann::json to_json(const SimScenario& s);
/// Missing keys keep their defaults; unknown keys throw InvalidScenario.
SimScenario scenario_from_json(const nlohmann::json& doc);

enum class StrategyKind { single, parallel, cotalk };

struct Strategy {
  StrategyKind kind = StrategyKind::cotalk;
  int rounds = 2;

  static Strategy single() { return {StrategyKind::single, 1}; }
  static Strategy parallel(int m) { return {StrategyKind::parallel, m}; }
  static Strategy cotalk(int n) { return {StrategyKind::cotalk, n}; }
  std::string label() const;  // "single", "parallel(3)", "cotalk(2)"
  /// Accepts the label forms above.
  static Strategy parse(const std::string& label);
  bool operator==(const Strategy&) const = default;
};

struct SimOutcome {
  Strategy strategy;
  int covered_units = 0;
  double total_time_s = 0.0;
  double duplication_pct = 0.0;
  double speed = 0.0;  // covered units per second
  double j = 0.0;
  double e = 0.0;
  std::vector<int> round_units;  // units emitted in each round
  std::vector<int> delta_i;      // newly covered units per round
  std::vector<int> z;            // per latent unit: 0 covered, -1 missed

  bool operator==(const SimOutcome&) const = default;
};

nlohmann::json to_json(const SimOutcome& o);

/// One trial drawn from `seed`.
SimOutcome simulate_trial(const SimScenario& s, const Strategy& strategy, std::uint64_t seed);

/// Trial 0 of the scenario's seed stream.
SimOutcome simulate_strategy(const SimScenario& s, const Strategy& strategy);

/// Seed for trial `index` (splitmix64 over the scenario seed).
std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) noexcept;

struct TrialSummary {
  Strategy strategy;
  int trials = 0;
  double mean_covered = 0.0;
  double mean_time_s = 0.0;
  double mean_duplication_pct = 0.0;
  double mean_speed = 0.0;
  double mean_j = 0.0;
  double mean_e = 0.0;
  std::vector<double> mean_delta_i;
  std::vector<double> var_delta_i;  // sample variance per round
};

nlohmann::json to_json(const TrialSummary& t);

/// Runs `trials` independent trials, optionally on several threads; the
/// result does not depend on the thread count.
TrialSummary simulate_trials(const SimScenario& s, const Strategy& strategy, int trials,
                             int threads = 1);

/// Newly covered units per round for one seeded trial.
std::vector<int> info_gain_trace(const SimScenario& s, const Strategy& strategy);

struct DeltaTReport {
  double delta_t = 0.0;  // T_parallel(m) - T_cotalk(n)
  double t_parallel = 0.0;
  double t_cotalk = 0.0;
  bool premise_holds = true;
  std::vector<std::string> violations;
};

nlohmann::json to_json(const DeltaTReport& r);

enum class PremiseCheck { report, strict };

/// Closed form with deterministic unit counts. In strict mode a violated
/// premise (c_2 < c_1, v_read > v_talk, m > n >= 2, t_observe >= 0) throws
/// PremiseViolation; report mode returns the flags with the value.
DeltaTReport delta_t(const SimScenario& s, int n, int m,
                     PremiseCheck check = PremiseCheck::strict);

struct ParetoRow {
  std::size_t scenario_index = 0;
  Strategy strategy;
  double j = 0.0;
  double t = 0.0;
  double e = 0.0;
  double speed = 0.0;
  double duplication_pct = 0.0;
  bool dominated = false;  // another strategy has J >= and T <= with one strict
};

std::vector<ParetoRow> pareto_sweep(const std::vector<SimScenario>& grid,
                                    const std::vector<Strategy>& strategies, int trials,
                                    int threads = 1);

}  // namespace cotalk::sim
