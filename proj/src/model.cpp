#include "scenefuse/model.hpp"

#include <cmath>

#include "scenefuse/error.hpp"

namespace scenefuse {

std::string to_string(const Diagnostic& d) {
  return "line " + std::to_string(d.line) + ": " + d.message;
}

std::string_view to_string(Region r) noexcept {
  return r == Region::Left ? "left" : "right";
}

std::optional<Region> parse_region(std::string_view s) noexcept {
  if (s == "left" || s == "Left") return Region::Left;
  if (s == "right" || s == "Right") return Region::Right;
  return std::nullopt;
}

const SegClassStat* SegmentationSummary::find(std::string_view class_label) const noexcept {
  for (const auto& s : stats) {
    if (s.class_label == class_label) return &s;
  }
  return nullptr;
}

SegClassStat make_class_stat(std::string class_label, double left_fraction, double right_fraction,
                             double presence_threshold) {
  SegClassStat s;
  s.class_label = std::move(class_label);
  s.left_fraction = left_fraction;
  s.right_fraction = right_fraction;
  s.present_left = left_fraction >= presence_threshold;
  s.present_right = right_fraction >= presence_threshold;
  return s;
}

std::set<std::string, std::less<>> default_class_set() {
  return {"person", "car", "bus", "truck", "bicycle", "traffic light", "motorcycle"};
}

namespace {

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

class Collector {
 public:
  void error(std::string field, std::string message) {
    out_.push_back({std::move(field), std::move(message), Violation::Severity::Error});
  }
  void warning(std::string field, std::string message) {
    out_.push_back({std::move(field), std::move(message), Violation::Severity::Warning});
  }
  std::vector<Violation> take() { return std::move(out_); }

 private:
  std::vector<Violation> out_;
};

void check_detection(const SceneRecord& r, std::size_t i, const ValidationOptions& opt,
                     Collector& c) {
  const Detection& d = r.detections[i];
  const std::string at = "detections[" + std::to_string(i) + "]";

  if (d.class_label.empty()) {
    c.error(at + ".class", "empty class label");
  } else if (!opt.known_classes.contains(d.class_label)) {
    c.warning(at + ".class", "unknown class '" + d.class_label + "'");
  }
  if (!in_unit(d.confidence)) c.error(at + ".confidence", "confidence out of range");

  const BoundingBox& b = d.bbox;
  const bool degenerate = b.x2 <= b.x1 || b.y2 <= b.y1;
  if (degenerate) c.error(at + ".bbox", "degenerate bbox");
  if (b.x1 < 0 || b.y1 < 0 || b.x2 < 0 || b.y2 < 0) {
    c.error(at + ".bbox", "bbox coordinate negative");
  }
  if (r.frame_width > 0 && r.frame_height > 0 && (b.x2 > r.frame_width || b.y2 > r.frame_height)) {
    c.error(at + ".bbox", "bbox outside frame");
  }

  if (d.distance_m.has_value() != d.region.has_value()) {
    c.error(at, "distance and region must be annotated together");
  }
  if (d.distance_m && !(std::isfinite(*d.distance_m) && *d.distance_m > 0.0)) {
    c.error(at + ".distance_m", "distance not positive");
  }
  if (d.region && !degenerate && r.frame_width > 0) {
    // Same half-open split as geometry::assign_region.
    const Region expected = 2.0 * b.centroid_x() < r.frame_width ? Region::Left : Region::Right;
    if (*d.region != expected) c.error(at + ".region", "region inconsistent with bbox centroid");
  }
}

void check_segmentation(const SceneRecord& r, const ValidationOptions& opt, Collector& c) {
  const SegmentationSummary& s = r.segmentation;
  if (!in_unit(s.road_global_fraction)) c.error("segmentation.road_global", "fraction out of range");

  double total = s.road_global_fraction;
  for (std::size_t i = 0; i < s.stats.size(); ++i) {
    const SegClassStat& st = s.stats[i];
    const std::string at = "segmentation.stats[" + std::to_string(i) + "]";
    if (st.class_label == "road") c.error(at, "road must be reported as road_global only");
    if (!in_unit(st.left_fraction) || !in_unit(st.right_fraction)) {
      c.error(at, "fraction out of range");
      continue;
    }
    if (st.present_left != (st.left_fraction >= opt.presence_threshold) ||
        st.present_right != (st.right_fraction >= opt.presence_threshold)) {
      c.error(at, "presence flag disagrees with threshold");
    }
    total += (st.left_fraction + st.right_fraction) / 2.0;
  }
  constexpr double kEps = 1e-9;
  if (r.frame_width % 2 == 0 && total > 1.0 + kEps) {
    c.error("segmentation", "coverage exceeds frame");
  }
}

}  // namespace

std::vector<Violation> validate_record(const SceneRecord& r, const ValidationOptions& opt) {
  Collector c;
  if (r.scenario_id.empty()) c.error("scenario_id", "empty scenario id");
  if (r.frame_width <= 0 || r.frame_height <= 0) c.error("frame", "frame size not positive");

  for (std::size_t i = 0; i < r.detections.size(); ++i) check_detection(r, i, opt, c);
  check_segmentation(r, opt, c);

  const Telemetry& t = r.telemetry;
  if (!std::isfinite(t.speed_kmh) || t.speed_kmh < 0.0) c.error("telemetry.speed_kmh", "speed negative");
  if (!std::isfinite(t.steering_angle_deg)) c.error("telemetry.steering_angle_deg", "steering not finite");

  const GeoFix& g = r.geofix;
  if (!(g.lat >= -90.0 && g.lat <= 90.0)) c.error("geofix.lat", "lat out of range");
  if (!(g.lon >= -180.0 && g.lon <= 180.0)) c.error("geofix.lon", "lon out of range");
  return c.take();
}

bool has_errors(const std::vector<Violation>& violations) noexcept {
  for (const auto& v : violations) {
    if (v.severity == Violation::Severity::Error) return true;
  }
  return false;
}

}  // namespace scenefuse
