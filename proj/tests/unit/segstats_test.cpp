#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "scenefuse/segstats.hpp"
#include "test_support.hpp"

using namespace scenefuse;
using testsupport::fixture;

TEST(Segstats, TinyFixtureCounts) {
  const auto m = load_label_map(fixture("labelmaps/tiny.pgm"), fixture("labelmaps/classes.txt"));
  ASSERT_EQ(m.width, 8);
  ASSERT_EQ(m.height, 4);
  const auto c = count_coverage(m);
  EXPECT_EQ(c.left_area, 16u);
  EXPECT_EQ(c.right_area, 16u);
  EXPECT_EQ(c.find("road")->left, 10u);
  EXPECT_EQ(c.find("road")->right, 10u);
  EXPECT_EQ(c.find("sidewalk")->left, 2u);
  EXPECT_EQ(c.find("sidewalk")->right, 0u);
  EXPECT_EQ(c.find("person")->right, 2u);

  const auto s = coverage(m);
  EXPECT_DOUBLE_EQ(s.road_global_fraction, 20.0 / 32.0);
  EXPECT_EQ(s.find("road"), nullptr);
  const auto* sw = s.find("sidewalk");
  ASSERT_NE(sw, nullptr);
  EXPECT_DOUBLE_EQ(sw->left_fraction, 0.125);
  EXPECT_TRUE(sw->present_left);
  EXPECT_FALSE(sw->present_right);
}

TEST(Segstats, OddWidthMidlineIsRight) {
  LabelMap m;
  m.width = 3;
  m.height = 1;
  m.cells = {0, 1, 1};
  m.class_names = {{0, "a"}, {1, "b"}};
  const auto c = count_coverage(m);
  EXPECT_EQ(c.left_area, 1u);
  EXPECT_EQ(c.right_area, 2u);
  EXPECT_EQ(c.find("b")->right, 2u);
}

TEST(Segstats, Errors) {
  LabelMap m;
  m.width = 1;
  m.height = 1;
  m.cells = {0};
  m.class_names = {{0, "a"}};
  EXPECT_THROW(count_coverage(m), LabelMapError);
  m.width = 2;
  m.cells = {0, 7};
  EXPECT_THROW(count_coverage(m), LabelMapError);
}

TEST(Segstats, PromptOrderAndFiltering) {
  SegmentationSummary s;
  s.road_global_fraction = 0.4;
  s.stats = {make_class_stat("vegetation", 0.03, 0.05, 0.001), make_class_stat("wall", 0.0, 0.0, 0.001),
             make_class_stat("building", 0.1, 0.1, 0.001), make_class_stat("person", 0.001, 0.003, 0.001),
             make_class_stat("car", 0.02, 0.0, 0.001), make_class_stat("terrain", 0.01, 0.0, 0.001)};
  const auto rows = summarize_for_prompt(s);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.class_label);
  EXPECT_EQ(names, (std::vector<std::string>{"sidewalk", "person", "building", "vegetation", "terrain", "car"}));
  EXPECT_FALSE(rows[0].present_left);
}

TEST(Segstats, DisplayNames) {
  EXPECT_EQ(display_name("person"), "Pedestrians");
  EXPECT_EQ(display_name("terrain"), "Terrain");
  EXPECT_EQ(display_name("traffic sign"), "Traffic sign");
}

TEST(Segstats, ClassTable) {
  std::istringstream in("0 road\n\n 11 traffic light \n");
  const auto t = parse_class_table(in);
  EXPECT_EQ(t.at(0), "road");
  EXPECT_EQ(t.at(11), "traffic light");
  std::istringstream bad("x road\n");
  EXPECT_THROW(parse_class_table(bad), Error);
  std::istringstream big("300 road\n");
  EXPECT_THROW(parse_class_table(big), Error);
}

TEST(Segstats, PgmRoundTripAndErrors) {
  std::mt19937_64 rng(5);
  const auto m = testsupport::random_label_map(rng, 2, 20);
  std::stringstream buf;
  write_pgm(buf, m);
  const auto back = read_pgm(buf, m.class_names);
  EXPECT_EQ(back.width, m.width);
  EXPECT_EQ(back.cells, m.cells);

  std::istringstream p2("P2\n2 2\n255\n0 0 0 0\n");
  EXPECT_THROW(read_pgm(p2, {}), LabelMapError);
  std::istringstream truncated(std::string("P5\n4 4\n255\n") + std::string(3, '\0'));
  EXPECT_THROW(read_pgm(truncated, {{0, "road"}}), LabelMapError);
  std::istringstream huge("P5\n100000 100000\n255\n");
  EXPECT_THROW(read_pgm(huge, {}), LabelMapError);
}

// Property: exact agreement with a per-pixel oracle, and every pixel counted once.
TEST(Segstats, PropertyMatchesBruteForce) {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    const auto m = testsupport::random_label_map(rng, 2, 64);
    const auto got = count_coverage(m);
    const auto want = testsupport::brute_force_coverage(m);
    ASSERT_EQ(got.left_area, want.left_area);
    ASSERT_EQ(got.right_area, want.right_area);
    ASSERT_EQ(got.classes.size(), want.by_name.size());
    std::uint64_t total = 0;
    for (const auto& c : got.classes) {
      const auto& w = want.by_name.at(c.class_label);
      ASSERT_EQ(c.left, w.first);
      ASSERT_EQ(c.right, w.second);
      total += c.left + c.right;
    }
    ASSERT_EQ(total, static_cast<std::uint64_t>(m.width) * m.height);
  }
}
