#include <gtest/gtest.h>

#include <set>

#include "screenleak/experiments.hpp"

using namespace screenleak;

TEST(Seeds, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 10; ++a) {
    for (std::uint64_t b = 0; b < 10; ++b) seen.insert(derive_seed(7, a, b));
  }
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(7, 1, 2), derive_seed(7, 1, 2));
  EXPECT_NE(derive_seed(7, 1, 2), derive_seed(8, 1, 2));
}

TEST(PickWords, LengthsAndDeterminism) {
  std::vector<std::string> pool;
  for (char a = 'a'; a <= 'z'; ++a) {
    for (std::size_t len = 2; len <= 8; ++len) pool.push_back(std::string(len, a));
  }
  const auto words = pick_words(pool, 5, 3);
  EXPECT_EQ(words.size(), 20u);
  for (const auto& w : words) {
    EXPECT_GE(w.size(), 3u);
    EXPECT_LE(w.size(), 6u);
  }
  EXPECT_EQ(words, pick_words(pool, 5, 3));
}

TEST(Websites, FamilyPagesShareLayoutButDiffer) {
  ScreenProfile p;
  const auto a = website_frame(p, 0, 1, SiteContent::kFamily);
  const auto b = website_frame(p, 1, 1, SiteContent::kFamily);
  EXPECT_NE(a, b);
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) same += a.pixels[i] == b.pixels[i];
  EXPECT_GT(same, a.pixels.size() / 2);
  EXPECT_EQ(website_frame(p, 3, 9), website_frame(p, 3, 9));
}

TEST(Delay, OneMetreShift) {
  ScreenProfile p;
  const auto rig = make_rig(p, null_fingerprint(), 20.0);
  EXPECT_NEAR(static_cast<double>(delay_shift(rig, gen_zebra_frame(p, 100, ZebraKind::kSquare), 1.0, 1.0, 5)),
              560.0, 3.0);
}
