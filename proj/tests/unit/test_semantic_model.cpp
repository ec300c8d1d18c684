#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cotalk/dedup.hpp"
#include "cotalk/error.hpp"
#include "cotalk/semantic_model.hpp"
#include "test_support.hpp"

using namespace cotalk;
using namespace cotalk::semantic;
using cotalk::test_support::random_units;

namespace {

SemanticUnit U(const char* obj, AttributeKind k, const char* v) { return SemanticUnit::make(obj, k, v); }

// Distinct attribute identities plus one per object that has none.
std::size_t count_by_enumeration(const std::vector<SemanticUnit>& units) {
  std::set<UnitIdentity> edges;
  std::set<std::string> objects, with_attrs;
  for (const auto& u : units) {
    objects.insert(u.object_name);
    if (!u.is_existence()) {
      edges.insert(u.identity());
      with_attrs.insert(u.object_name);
    }
  }
  return edges.size() + (objects.size() - with_attrs.size());
}

}  // namespace

TEST(SemanticTree, EmptyInput) {
  auto t = build_tree({});
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(unit_count(t), 0u);
  EXPECT_TRUE(t.units().empty());
}

TEST(SemanticTree, OneObjectFiveAttributes) {
  std::vector<SemanticUnit> u{U("terminal", AttributeKind::size, "large"),
                              U("terminal", AttributeKind::colour, "white"),
                              U("terminal", AttributeKind::material, "glass"),
                              U("terminal", AttributeKind::absolute_location, "center"),
                              U("terminal", AttributeKind::shape, "curved")};
  auto t = build_tree(u);
  ASSERT_EQ(t.objects().size(), 1u);
  EXPECT_EQ(unit_count(t), 5u);
}

TEST(SemanticTree, DuplicatesCollapse) {
  std::vector<SemanticUnit> u{U("car", AttributeKind::colour, "black"), U("car", AttributeKind::colour, "black"),
                              U("road", AttributeKind::amount, "two")};
  auto t = build_tree(u);
  EXPECT_EQ(t.objects().size(), 2u);
  EXPECT_EQ(unit_count(t), 2u);
}

TEST(SemanticTree, AttributelessObjectsCountOnce) {
  std::vector<SemanticUnit> u{U("a", AttributeKind::colour, "red"), U("a", AttributeKind::size, "big"),
                              SemanticUnit::existence("b"), U("c", AttributeKind::shape, "round")};
  EXPECT_EQ(unit_count(build_tree(u)), 4u);
}

TEST(SemanticTree, ExistenceUnitAbsorbedByRealAttribute) {
  std::vector<SemanticUnit> u{SemanticUnit::existence("car"), U("car", AttributeKind::colour, "black")};
  auto t = build_tree(u);
  EXPECT_EQ(unit_count(t), 1u);
  EXPECT_FALSE(t.contains(SemanticUnit::existence("car").identity()));
}

TEST(SemanticTree, NamesAreNormalized) {
  std::vector<SemanticUnit> u{U("The Car", AttributeKind::colour, "Black"), U("car", AttributeKind::colour, "black")};
  EXPECT_EQ(unit_count(build_tree(u)), 1u);
}

TEST(SemanticTree, InvalidUnitsRejected) {
  EXPECT_THROW(U("", AttributeKind::colour, "black"), Error);
  EXPECT_THROW(U("car", AttributeKind::colour, "  "), Error);
}

TEST(SemanticTree, RandomTreesMatchEdgeEnumeration) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto units = random_units(rng, static_cast<int>(rng() % 25));
    EXPECT_EQ(unit_count(build_tree(units)), count_by_enumeration(units));
  }
}

TEST(SemanticTree, PermutationInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto units = random_units(rng, 15);
    auto base = build_tree(units);
    for (int p = 0; p < 5; ++p) {
      std::shuffle(units.begin(), units.end(), rng);
      EXPECT_EQ(build_tree(units), base);
    }
  }
}

TEST(SemanticTree, UnitsRoundTrip) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = build_tree(random_units(rng, 12));
    auto again = build_tree(t.units());
    EXPECT_EQ(again, t);
    EXPECT_EQ(t.units().size(), unit_count(t));
  }
}

TEST(SemanticVector, BitsFollowVocabularyOrder) {
  Vocabulary v;
  auto a = U("car", AttributeKind::colour, "black");
  auto b = U("road", AttributeKind::amount, "two");
  auto c = U("sky", AttributeKind::colour, "blue");
  v.add(a.identity());
  v.add(b.identity());
  v.add(c.identity());
  std::vector<SemanticUnit> units{a, b};
  auto vec = to_vector(build_tree(units), v);
  EXPECT_EQ(vec.bits, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_EQ(vec.popcount(), 2u);
  EXPECT_EQ(to_vector(build_tree({}), v).popcount(), 0u);
}

TEST(SemanticVector, SelfVocabularyIsAllOnes) {
  std::mt19937_64 rng(5);
  auto t = build_tree(random_units(rng, 20));
  Vocabulary v;
  v.extend(t);
  auto vec = to_vector(t, v);
  EXPECT_EQ(vec.popcount(), unit_count(t));
  EXPECT_TRUE(std::all_of(vec.bits.begin(), vec.bits.end(), [](auto b) { return b == 1; }));
}

TEST(SemanticVector, UnknownUnitThrows) {
  Vocabulary v;
  std::vector<SemanticUnit> units{U("car", AttributeKind::colour, "black")};
  try {
    to_vector(build_tree(units), v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownUnit);
  }
}

TEST(Vocabulary, IndicesAreStable) {
  Vocabulary v;
  auto a = U("car", AttributeKind::colour, "black").identity();
  auto b = U("car", AttributeKind::size, "big").identity();
  EXPECT_EQ(v.add(a), 0u);
  EXPECT_EQ(v.add(b), 1u);
  EXPECT_EQ(v.add(a), 0u);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(*v.find(b), 1u);
}

TEST(Residual, Examples) {
  auto m = metrics::DuplicationMatcher::exact();
  auto black = U("car", AttributeKind::colour, "black");
  auto two = U("car", AttributeKind::amount, "two");
  std::vector<SemanticUnit> prev{black};
  std::vector<SemanticUnit> cur{black, two};
  auto r = residual(build_tree(prev), build_tree(cur), m);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].identity(), two.identity());
  EXPECT_TRUE(residual(build_tree(cur), build_tree(cur), m).empty());
  EXPECT_EQ(residual(build_tree({}), build_tree(cur), m).size(), 2u);
  // A bare mention of a known object is covered; of a new one it is not.
  std::vector<SemanticUnit> bare{SemanticUnit::existence("car"), SemanticUnit::existence("lamp")};
  auto rb = residual(build_tree(prev), build_tree(bare), m);
  ASSERT_EQ(rb.size(), 1u);
  EXPECT_EQ(rb[0].object_name, "lamp");
}

TEST(ExtractionJson, RoundTrip) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = build_tree(random_units(rng, 15));
    auto again = build_tree(units_from_extraction_json(to_extraction_json(t)));
    EXPECT_EQ(again, t);
  }
}

TEST(ExtractionJson, SchemaAndAliases) {
  auto doc = nlohmann::json::parse(R"([
    {"name": "Sea Surface", "attributes": {"colour": "green"}},
    {"name": "seaweed", "attributes": {"amount": "a patch of", "color": "green", "texture": "slimy"}},
    {"name": "rock", "attributes": {}},
    {"name": "boat", "attributes": {"size": ["small", "tiny"]}}
  ])");
  auto t = build_tree(units_from_extraction_json(doc));
  EXPECT_TRUE(t.contains({"sea surface", AttributeKind::colour, "green"}));
  EXPECT_TRUE(t.contains({"seaweed", AttributeKind::amount, "a patch of"}));
  EXPECT_TRUE(t.contains({"seaweed", AttributeKind::colour, "green"}));
  EXPECT_TRUE(t.contains({"seaweed", AttributeKind::other, "slimy"}));
  EXPECT_TRUE(t.contains(SemanticUnit::existence("rock").identity()));
  EXPECT_TRUE(t.contains({"boat", AttributeKind::size, "tiny"}));
  EXPECT_EQ(unit_count(t), 7u);
}

TEST(ExtractionJson, MalformedRejected) {
  for (const char* bad : {R"({"name": "x"})", R"([{"attributes": {}}])", R"([{"name": "x", "attributes": 3}])",
                          R"([{"name": "x", "attributes": {"colour": {"a": 1}}}])", R"([{"name": "  "}])"}) {
    try {
      units_from_extraction_json(nlohmann::json::parse(bad));
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedResponse) << bad;
    }
  }
}

TEST(StateJson, KeepsSourceRounds) {
  std::vector<SemanticUnit> u{SemanticUnit::make("car", AttributeKind::colour, "black", 1),
                              SemanticUnit::make("tree", AttributeKind::amount, "two", 2),
                              SemanticUnit::existence("road", 2)};
  auto t = build_tree(u);
  auto again = tree_from_state_json(to_state_json(t));
  EXPECT_EQ(again, t);
  for (const auto& unit : again.units()) {
    EXPECT_EQ(unit.source_round, unit.object_name == "car" ? 1 : 2);
  }
}

TEST(AttributeKinds, Names) {
  for (std::size_t i = 0; i < kAttributeKindCount; ++i) {
    auto k = static_cast<AttributeKind>(i);
    EXPECT_EQ(attribute_kind_from_name(to_string(k)), k);
    EXPECT_EQ(parse_attribute_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_attribute_kind("color"), AttributeKind::colour);
  EXPECT_EQ(parse_attribute_kind("object description"), AttributeKind::object_description);
  EXPECT_EQ(parse_attribute_kind("whatever"), AttributeKind::other);
  EXPECT_FALSE(attribute_kind_from_name("color").has_value());
}
