#include <gtest/gtest.h>

#include "cotalk/hash.hpp"
#include "cotalk/text.hpp"

using namespace cotalk;

TEST(Text, NormalizeCollapsesWhitespaceAndCase) {
  EXPECT_EQ(text::normalize("  Black \t  CAR\n"), "black car");
  EXPECT_EQ(text::normalize(""), "");
}

TEST(Text, ObjectNamesDropLeadingArticles) {
  EXPECT_EQ(text::normalize_object_name("The Sea Surface"), "sea surface");
  EXPECT_EQ(text::normalize_object_name("an apple"), "apple");
  EXPECT_EQ(text::normalize_object_name("theatre"), "theatre");
}

TEST(Text, WordCount) {
  EXPECT_EQ(text::word_count(""), 0u);
  EXPECT_EQ(text::word_count("   "), 0u);
  EXPECT_EQ(text::word_count("black car parked"), 3u);
  EXPECT_EQ(text::word_count(" a\tb\nc  d "), 4u);
}

TEST(Text, SplitSentencesKeepsPunctuation) {
  auto s = text::split_sentences("A car. Two trees!  Is it red?");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], "A car.");
  EXPECT_EQ(s[1], "Two trees!");
  EXPECT_EQ(s[2], "Is it red?");
  auto t = text::split_sentences("no terminal punctuation");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], "no terminal punctuation");
  EXPECT_TRUE(text::split_sentences("  ").empty());
}

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
