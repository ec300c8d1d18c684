#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cotalk/error.hpp"
#include "cotalk/mock_rules.hpp"
#include "cotalk/semantic_model.hpp"
#include "cotalk/text.hpp"

using namespace cotalk;
using namespace cotalk::gateway;
using semantic::AttributeKind;
using semantic::SemanticUnit;
using semantic::UnitIdentity;

namespace {

semantic::SemanticUnitTree extract_tree(std::string_view caption) {
  return semantic::build_tree(semantic::units_from_extraction_json(mock::extract(caption)));
}

const std::vector<std::string> kCaptions{
    "a black car on a road.",
    "two trees left of the car.",
    "The sea surface appears green, with a patch of green seaweed visible under the bridge in the upper right area.",
    "a large red house with a wooden door. many birds in the sky.",
    "a small dog next to a white bench.",
    "three round tables in the center of the image.",
};

}  // namespace

TEST(MockDenoise, StripsConnectives) {
  EXPECT_EQ(mock::denoise("then a car and then a road"), "a car a road");
  EXPECT_EQ(mock::denoise("Furthermore, a dog. Next a bench."), "a dog. a bench.");
  EXPECT_EQ(mock::denoise("a car next to a tree"), "a car next to a tree");
  EXPECT_EQ(mock::denoise("a black car on a road."), "a black car on a road.");
  EXPECT_EQ(mock::denoise(""), "");
}

TEST(MockDenoise, Idempotent) {
  for (const char* s : {"then then a car", "and then next furthermore a dog next to a cat", "a car and a road",
                        "  spaced   out  text  "}) {
    auto once = mock::denoise(s);
    EXPECT_EQ(mock::denoise(once), once) << s;
  }
}

TEST(MockExtract, BlackCarOnARoad) {
  auto t = extract_tree("a black car on a road");
  EXPECT_EQ(t.objects().size(), 2u);
  EXPECT_TRUE(t.contains({"car", AttributeKind::colour, "black"}));
  EXPECT_TRUE(t.contains(SemanticUnit::existence("road").identity()));
  EXPECT_EQ(semantic::unit_count(t), 2u);
}

TEST(MockExtract, TwoTrees) {
  auto units = semantic::units_from_extraction_json(mock::extract("two trees."));
  ASSERT_EQ(units.size(), 1u);
  EXPECT_EQ(units[0].identity(), (UnitIdentity{"trees", AttributeKind::amount, "two"}));
}

TEST(MockExtract, SeaSurfaceExample) {
  auto t = extract_tree(kCaptions[2]);
  EXPECT_TRUE(t.contains({"sea surface", AttributeKind::colour, "green"}));
  EXPECT_TRUE(t.contains({"seaweed", AttributeKind::amount, "a patch of"}));
  EXPECT_TRUE(t.contains({"seaweed", AttributeKind::colour, "green"}));
}

TEST(MockExtract, RelativeLocation) {
  auto t = extract_tree("two trees left of the car.");
  EXPECT_TRUE(t.contains({"trees", AttributeKind::amount, "two"}));
  bool relative = false;
  for (const auto& u : t.units()) relative |= u.object_name == "trees" && u.kind == AttributeKind::relative_location;
  EXPECT_TRUE(relative);
}

TEST(MockExtract, ReplyFollowsSchema) {
  for (const auto& c : kCaptions) {
    auto doc = mock::extract(c);
    ASSERT_TRUE(doc.is_array());
    for (const auto& o : doc) {
      EXPECT_TRUE(o.at("name").is_string());
      EXPECT_TRUE(o.at("attributes").is_object());
    }
    EXPECT_GE(semantic::units_from_extraction_json(doc).size(), 1u) << c;
  }
}

TEST(MockMerge, Sequential) {
  EXPECT_EQ(mock::merge_sequential("a black car.", ""), "a black car.");
  EXPECT_EQ(mock::merge_sequential("the car is red.", "the car is black."), "the car is black.");
  EXPECT_EQ(mock::merge_sequential("a black car.", "a black car."), "a black car.");
  EXPECT_EQ(mock::merge_sequential("a black car.", "two trees."), "a black car. two trees.");
}

TEST(MockMerge, ParallelDedupAndOrderInvariance) {
  std::vector<std::string> same{"a black car.", "a black car."};
  EXPECT_EQ(mock::merge_parallel(same), "a black car.");
  std::vector<std::string> x{"two trees.", "a black car.", "a red house."};
  std::vector<std::string> y{"a red house.", "two trees.", "a black car."};
  EXPECT_EQ(mock::merge_parallel(x), mock::merge_parallel(y));
}

TEST(MockMerge, SequentialNeverLosesUnitsWithoutConflict) {
  for (std::size_t i = 0; i < kCaptions.size(); ++i) {
    for (std::size_t j = 0; j < kCaptions.size(); ++j) {
      auto before = extract_tree(kCaptions[i]);
      auto merged = extract_tree(mock::merge_sequential(kCaptions[i], kCaptions[j]));
      EXPECT_GE(semantic::unit_count(merged), semantic::unit_count(before)) << i << "," << j;
    }
  }
}

TEST(MockMerge, ConflictReplacedInsideSentence) {
  auto merged = mock::merge_sequential("a red car on a wide road.", "the car is black.");
  auto t = extract_tree(merged);
  EXPECT_FALSE(t.contains({"car", AttributeKind::colour, "red"})) << merged;
  EXPECT_TRUE(t.contains({"car", AttributeKind::colour, "black"})) << merged;
  EXPECT_TRUE(t.contains({"road", AttributeKind::size, "wide"})) << merged;
}

TEST(MockQuestions, AlwaysFive) {
  for (const auto& c : kCaptions) {
    std::istringstream in(mock::questions(c));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      EXPECT_EQ(line.rfind("Q" + std::to_string(n) + ": ", 0), 0u) << line;
    }
    EXPECT_EQ(n, 5) << c;
  }
  EXPECT_NE(mock::questions(kCaptions[2]).find("What color is the sea surface?"), std::string::npos);
}

TEST(AudioFixture, RoundTrip) {
  EXPECT_EQ(mock::read_audio_fixture(mock::make_audio_fixture("a black car")), "a black car");
  try {
    mock::read_audio_fixture("RIFF....WAVE");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedResponse);
  }
}
