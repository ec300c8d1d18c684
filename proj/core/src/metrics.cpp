#include "cotalk/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "cotalk/dedup.hpp"
#include "cotalk/error.hpp"
#include "cotalk/text.hpp"

namespace cotalk::metrics {

double entropy_proxy(std::string_view caption) {
  return static_cast<double>(text::word_count(caption)) * kBitsPerWord;
}

IntrinsicReport make_intrinsic_report(std::size_t unit_count, double total_time_s,
                                      std::span<const double> round_duplication) {
  IntrinsicReport r;
  r.unit_count = unit_count;
  r.total_time_s = total_time_s;
  if (total_time_s > 0.0) r.speed = static_cast<double>(unit_count) / total_time_s;
  if (!round_duplication.empty()) {
    r.duplication_pct = std::accumulate(round_duplication.begin(), round_duplication.end(), 0.0) /
                        static_cast<double>(round_duplication.size());
  }
  return r;
}

QualityObjective quality(const semantic::SemanticUnitTree& merged,
                         const std::optional<semantic::SemanticUnitTree>& reference,
                         std::string_view caption, const QualityWeights& weights) {
  if (!reference) throw Error(ErrorCode::MissingReference, "no reference tree for this session");
  if (weights.beta < 0.0 || weights.gamma < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "beta and gamma must be non-negative");
  }
  QualityObjective q;
  auto ref_units = reference->units();
  auto merged_units = merged.units();
  q.j_suf = static_cast<double>(
      match_units(ref_units, merged_units, DuplicationMatcher::exact()).size());
  q.j_min_penalty = entropy_proxy(caption);
  q.j_int_penalty = weights.j_int ? weights.j_int(caption) : 0.0;
  q.beta = weights.beta;
  q.gamma = weights.gamma;
  return q;
}

double efficiency(double j, double total_time_s) {
  if (!(total_time_s > 0.0)) throw Error(ErrorCode::ZeroTime, "efficiency needs positive time");
  return j / total_time_s;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << csv_field(r.session_id) << ',' << csv_field(r.mode) << ',' << r.unit_count << ','
        << fmt(r.total_time_s) << ',' << fmt(r.speed) << ',' << fmt(r.duplication_pct) << ','
        << fmt(r.j) << ',' << fmt(r.e) << '\n';
  }
}

}  // namespace cotalk::metrics
