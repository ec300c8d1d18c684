#include <sstream>

#include <gtest/gtest.h>

#include "cotalk/error.hpp"
#include "cotalk/metrics.hpp"

using namespace cotalk;
using namespace cotalk::metrics;
using semantic::AttributeKind;
using semantic::SemanticUnit;

namespace {

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

semantic::SemanticUnitTree tree_of(int objects) {
  std::vector<SemanticUnit> u;
  for (int i = 0; i < objects; ++i) u.push_back(SemanticUnit::make("obj" + std::to_string(i), AttributeKind::colour, "red"));
  return semantic::build_tree(u);
}

}  // namespace

TEST(Entropy, BitsPerWord) {
  EXPECT_EQ(entropy_proxy(""), 0.0);
  EXPECT_DOUBLE_EQ(entropy_proxy("black car parked"), 35.46);
  EXPECT_DOUBLE_EQ(entropy_proxy(words(100)), 1182.0);
}

TEST(IntrinsicReport, Speed) {
  auto r = make_intrinsic_report(10, 25.0, {});
  ASSERT_TRUE(r.speed.has_value());
  EXPECT_DOUBLE_EQ(*r.speed, 0.4);
  EXPECT_DOUBLE_EQ(*make_intrinsic_report(0, 12.0, {}).speed, 0.0);
  EXPECT_FALSE(make_intrinsic_report(3, 0.0, {}).speed.has_value());
  std::vector<double> dup{20.0, 40.0};
  EXPECT_DOUBLE_EQ(make_intrinsic_report(3, 1.0, dup).duplication_pct, 30.0);
}

TEST(Quality, MergedEqualsReference) {
  auto ref = tree_of(7);
  auto q = quality(ref, ref, "caption");
  EXPECT_DOUBLE_EQ(q.value(), 7.0);
  EXPECT_DOUBLE_EQ(quality(semantic::build_tree({}), ref, "").j_suf, 0.0);
}

TEST(Quality, PlugInExample) {
  auto ref = tree_of(40);
  auto merged = tree_of(30);
  auto q = quality(merged, ref, words(200), {.beta = 0.001, .gamma = 0.0, .j_int = {}});
  EXPECT_DOUBLE_EQ(q.j_suf, 30.0);
  EXPECT_DOUBLE_EQ(q.j_min_penalty, 2364.0);
  EXPECT_NEAR(q.value(), 27.636, 1e-12);
}

TEST(Quality, InterpretabilityScorerIsApplied) {
  auto ref = tree_of(3);
  QualityWeights w{.beta = 0.0, .gamma = 2.0, .j_int = [](std::string_view) { return 0.5; }};
  EXPECT_DOUBLE_EQ(quality(ref, ref, "x", w).value(), 2.0);
}

TEST(Quality, MissingReference) {
  try {
    quality(tree_of(1), std::nullopt, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingReference);
  }
}

TEST(Efficiency, Division) {
  EXPECT_DOUBLE_EQ(efficiency(0.0, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(efficiency(30.0, 100.0), 0.3);
  try {
    efficiency(1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroTime);
  }
}

TEST(MetricsCsv, HeaderAndOptionalColumns) {
  std::vector<MetricsRow> rows{{"s1", "cotalk", 5, 12.5, 0.4, 25.0, std::nullopt, std::nullopt},
                               {"s2", "single", 0, 0.0, std::nullopt, 0.0, 3.0, 0.5}};
  std::ostringstream out;
  write_metrics_csv(out, rows);
  EXPECT_EQ(out.str(), std::string(kMetricsCsvHeader) + "\n" +
                           "s1,cotalk,5,12.5,0.4,25,,\n"
                           "s2,single,0,0,,0,3,0.5\n");
}
