#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class LabelMapError : public Error {
 public:
  using Error::Error;
};

// Row-major grid of 8-bit class ids plus the id -> Cityscapes name table.
// Several ids may share a name; counts are merged by name.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;
  std::map<int, std::string> class_names;
};

inline constexpr std::string_view kRoadClass = "road";
inline constexpr std::string_view kSidewalkClass = "sidewalk";
inline constexpr double kDefaultPresenceThreshold = 0.001;

struct ClassCount {
  std::string class_label;
  std::uint64_t left = 0;
  std::uint64_t right = 0;
};

// Exact pixel counts. The left half is columns [0, W/2), the right half the
// remaining columns, so on odd widths the midline column counts as Right.
struct CoverageCounts {
  int width = 0;
  int height = 0;
  std::uint64_t left_area = 0;
  std::uint64_t right_area = 0;
  // Sorted by class label; includes every named class, even with zero pixels.
  std::vector<ClassCount> classes;

  const ClassCount* find(std::string_view class_label) const noexcept;
};

CoverageCounts count_coverage(const LabelMap& map);

SegmentationSummary summary_from_counts(const CoverageCounts& counts,
                                        double presence_threshold = kDefaultPresenceThreshold);

SegmentationSummary coverage(const LabelMap& map,
                             double presence_threshold = kDefaultPresenceThreshold);

// Prompt rows in canonical order: sidewalk, person, building, vegetation,
// terrain, then the rest alphabetically. Sidewalk is always present (zero
// when absent from the summary); other classes only when either side > 0.
// Road is not a row here; it is rendered from road_global_fraction.
std::vector<SegClassStat> summarize_for_prompt(const SegmentationSummary& summary);

// Name used in prompt rows, e.g. "person" -> "Pedestrians", "terrain" -> "Terrain".
std::string display_name(std::string_view class_label);

// "<id> <name>" per line; names may contain spaces.
std::map<int, std::string> parse_class_table(std::istream& in);

// Binary 8-bit PGM (P5).
LabelMap read_pgm(std::istream& in, std::map<int, std::string> class_names);
LabelMap load_label_map(const std::filesystem::path& pgm, const std::filesystem::path& class_table);
void write_pgm(std::ostream& out, const LabelMap& map);

}  // namespace scenefuse
