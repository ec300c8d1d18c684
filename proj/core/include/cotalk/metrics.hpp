#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotalk/semantic_model.hpp"

namespace cotalk::metrics {

inline constexpr double kBitsPerWord = 11.82;

/// Whitespace words x 11.82 bits.
double entropy_proxy(std::string_view caption);

struct IntrinsicReport {
  std::size_t unit_count = 0;
  double total_time_s = 0.0;
  std::optional<double> speed;  // absent when total_time_s == 0
  double duplication_pct = 0.0;
};

/// Averages `round_duplication` (empty -> 0).
IntrinsicReport make_intrinsic_report(std::size_t unit_count, double total_time_s,
                                      std::span<const double> round_duplication);

/// Scores the interpretability penalty of a caption. Default returns 0.
using InterpretabilityScorer = std::function<double(std::string_view caption)>;

struct QualityWeights {
  double beta = 0.0;
  double gamma = 0.0;
  InterpretabilityScorer j_int;  // empty means constant zero
};

struct QualityObjective {
  double j_suf = 0.0;
  double j_min_penalty = 0.0;
  double j_int_penalty = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  double value() const noexcept { return j_suf - beta * j_min_penalty - gamma * j_int_penalty; }
};

/// Throws MissingReference when `reference` is empty-optional.
QualityObjective quality(const semantic::SemanticUnitTree& merged,
                         const std::optional<semantic::SemanticUnitTree>& reference,
                         std::string_view caption, const QualityWeights& weights = {});

/// J / T; throws ZeroTime unless T > 0.
double efficiency(double j, double total_time_s);

struct MetricsRow {
  std::string session_id;
  std::string mode;
  std::size_t unit_count = 0;
  double total_time_s = 0.0;
  std::optional<double> speed;
  double duplication_pct = 0.0;
  std::optional<double> j;
  std::optional<double> e;
};

inline constexpr std::string_view kMetricsCsvHeader =
    "session_id,mode,unit_count,total_time_s,speed_units_per_s,duplication_pct,J,E";

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

}  // namespace cotalk::metrics
