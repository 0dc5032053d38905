#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace scenefuse {

// Pixel box with origin at the top-left corner of the frame.
struct BoundingBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const noexcept { return x2 - x1; }
  int height() const noexcept { return y2 - y1; }
  double centroid_x() const noexcept { return (x1 + x2) / 2.0; }

  bool operator==(const BoundingBox&) const = default;
};

enum class Region { Left, Right };

std::string_view to_string(Region r) noexcept;
std::optional<Region> parse_region(std::string_view s) noexcept;

struct Detection {
  std::string class_label;
  double confidence = 0.0;
  BoundingBox bbox;
  std::optional<double> distance_m;
  std::optional<Region> region;

  bool annotated() const noexcept { return distance_m.has_value() && region.has_value(); }

  bool operator==(const Detection&) const = default;
};

struct SegClassStat {
  std::string class_label;
  double left_fraction = 0.0;
  double right_fraction = 0.0;
  bool present_left = false;
  bool present_right = false;

  bool operator==(const SegClassStat&) const = default;
};

// Road is reported only through road_global_fraction and never appears in stats.
struct SegmentationSummary {
  double road_global_fraction = 0.0;
  std::vector<SegClassStat> stats;

  const SegClassStat* find(std::string_view class_label) const noexcept;

  bool operator==(const SegmentationSummary&) const = default;
};

// Builds a stat whose presence flags follow the threshold rule.
SegClassStat make_class_stat(std::string class_label, double left_fraction, double right_fraction,
                             double presence_threshold);

struct Telemetry {
  double speed_kmh = 0.0;
  bool brake_pressed = false;
  // Stored verbatim from the source; no sign convention is imposed.
  double steering_angle_deg = 0.0;

  bool operator==(const Telemetry&) const = default;
};

struct GeoFix {
  double lat = 0.0;
  double lon = 0.0;
  std::optional<std::string> address;

  bool operator==(const GeoFix&) const = default;
};

struct SceneRecord {
  std::string scenario_id;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> frame_ref;
  int frame_width = 0;
  int frame_height = 0;
  std::vector<Detection> detections;
  SegmentationSummary segmentation;
  Telemetry telemetry;
  GeoFix geofix;

  bool operator==(const SceneRecord&) const = default;
};

struct Alert {
  std::string scenario_id;
  std::string backend_id;
  std::string backend_kind;
  std::string text;
  bool risk_flag = false;
  double latency_ms = 0.0;

  bool operator==(const Alert&) const = default;
};

struct HumanAnnotation {
  std::string scenario_id;
  bool risk = false;
  std::vector<std::string> critical_entities;
  std::string summary;

  bool operator==(const HumanAnnotation&) const = default;
};

// The detection classes that appear in the reference scenario prompts.
std::set<std::string, std::less<>> default_class_set();

struct ValidationOptions {
  std::set<std::string, std::less<>> known_classes = default_class_set();
  double presence_threshold = 0.001;
};

struct Violation {
  enum class Severity { Error, Warning };

  std::string field;
  std::string message;
  Severity severity = Severity::Error;

  bool operator==(const Violation&) const = default;
};

// Checks every record-level invariant. Unknown detection classes are
// reported with Warning severity; everything else is an Error.
std::vector<Violation> validate_record(const SceneRecord& record,
                                       const ValidationOptions& options = {});

bool has_errors(const std::vector<Violation>& violations) noexcept;

}  // namespace scenefuse
