#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "scenefuse/geometry.hpp"
#include "scenefuse/ingest.hpp"
#include "scenefuse/promptgen.hpp"
#include "test_support.hpp"

using namespace scenefuse;
using testsupport::fixture;
using testsupport::slurp;

namespace {

std::vector<SceneRecord> annotated_fixtures() {
  auto r = load_scene_records(fixture("scenarios.jsonl"));
  for (auto& rec : r.stream.records) {
    rec.detections = annotate_detections(rec.detections, {}, ClassHeightTable::defaults());
  }
  return r.stream.records;
}

}  // namespace

TEST(Prompt, GoldensByteForByte) {
  const auto records = annotated_fixtures();
  ASSERT_EQ(records.size(), 3u);
  for (const auto& rec : records) {
    const auto golden = slurp(fixture("goldens/" + rec.scenario_id + ".prompt.txt"));
    ASSERT_FALSE(golden.empty());
    EXPECT_EQ(render_prompt(rec).full_text, golden) << rec.scenario_id;
  }
}

TEST(Prompt, SectionOffsets) {
  const auto p = render_prompt(annotated_fixtures()[0]);
  EXPECT_EQ(p.instruction_offset, 0u);
  EXPECT_EQ(p.full_text.compare(p.vehicle_offset, 8, "Vehicle:"), 0);
  EXPECT_EQ(p.full_text.compare(p.location_offset, 9, "Location:"), 0);
  EXPECT_EQ(p.full_text.compare(p.scene_offset, 6, "Scene\n"), 0);
}

TEST(Prompt, NoDetectionsAndNoAddress) {
  SceneRecord r = annotated_fixtures()[0];
  r.detections.clear();
  r.geofix.address.reset();
  std::vector<std::string> notes;
  const auto p = render_prompt(r, kDefaultInstruction, &notes);
  EXPECT_NE(p.full_text.find("Scene\nObject Detection: none\n\nSegmentation"), std::string::npos);
  EXPECT_NE(p.full_text.find("Location: -25.09450, -50.16330\n"), std::string::npos);
  EXPECT_EQ(notes.size(), 1u);
}

TEST(Prompt, UnannotatedDetectionRejected) {
  auto r = load_scene_records(fixture("scenarios.jsonl")).stream.records[0];
  EXPECT_THROW(render_prompt(r), PromptError);
}

TEST(Prompt, CustomInstructionAndAddressPeriod) {
  SceneRecord r = annotated_fixtures()[1];
  r.geofix.address = "Somewhere.";
  const auto p = render_prompt(r, "Be brief.");
  EXPECT_EQ(p.full_text.rfind("Instruction\nBe brief.\n\n", 0), 0u);
  EXPECT_NE(p.full_text.find("Location: Somewhere.\n"), std::string::npos);
}

TEST(Prompt, NumberFormats) {
  EXPECT_EQ(format_fixed2(5.9912), "5.99");
  EXPECT_EQ(format_fixed2(-0.001), "0.00");
  EXPECT_EQ(format_percent(0.003), "0.30%");
  EXPECT_EQ(format_percent(0.3507), "35.07%");
  EXPECT_EQ(format_steering(-0.00065), "-0.00065");
  EXPECT_EQ(format_steering(-1.0151), "-1.0151");
  EXPECT_EQ(format_steering(0.0), "0");
  EXPECT_EQ(format_steering(-0.000001), "0");
  EXPECT_EQ(format_steering(2.5), "2.5");
}

TEST(Prompt, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(digest_hex(0xabcULL), "0000000000000abc");
}

TEST(Prompt, DigestTracksContent) {
  auto records = annotated_fixtures();
  const auto a = render_prompt(records[0]);
  EXPECT_EQ(prompt_digest(a), prompt_digest(render_prompt(records[0])));
  records[0].telemetry.speed_kmh = 41;
  EXPECT_NE(prompt_digest(a), prompt_digest(render_prompt(records[0])));
}

// Property: detection input order never changes the rendered prompt.
TEST(Prompt, PropertyPermutationInvariant) {
  std::mt19937_64 rng(11);
  for (const auto& rec : annotated_fixtures()) {
    const std::string want = render_prompt(rec).full_text;
    for (int i = 0; i < 50; ++i) {
      SceneRecord copy = rec;
      std::shuffle(copy.detections.begin(), copy.detections.end(), rng);
      ASSERT_EQ(render_prompt(copy).full_text, want);
    }
  }
}
