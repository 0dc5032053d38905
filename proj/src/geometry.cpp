#include "scenefuse/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace scenefuse {

ClassHeightTable::ClassHeightTable(std::map<std::string, double, std::less<>> heights) {
  for (auto& [label, h] : heights) set(label, h);
}

ClassHeightTable ClassHeightTable::defaults() {
  return ClassHeightTable({
      {"person", 1.7},
      {"car", 1.5},
      {"bus", 3.2},
      {"truck", 3.0},
      {"bicycle", 1.1},
      {"traffic light", 0.9},
      {"motorcycle", 1.3},
  });
}

std::optional<double> ClassHeightTable::height_of(std::string_view class_label) const {
  auto it = heights_.find(class_label);
  if (it == heights_.end()) return std::nullopt;
  return it->second;
}

void ClassHeightTable::set(std::string class_label, double height_m) {
  if (!(std::isfinite(height_m) && height_m > 0.0)) {
    throw DegenerateGeometryError("class height for '" + class_label + "' must be positive");
  }
  heights_[std::move(class_label)] = height_m;
}

double estimate_distance(double focal_px, double class_height_m, double bbox_height_px) {
  if (!(bbox_height_px > 0.0)) throw DegenerateGeometryError("bbox height must be positive");
  if (!(focal_px > 0.0)) throw DegenerateGeometryError("focal length must be positive");
  if (!(class_height_m > 0.0)) throw DegenerateGeometryError("class height must be positive");
  return focal_px * class_height_m / bbox_height_px;
}

Region assign_region(const BoundingBox& bbox, int frame_width) {
  // x1 + x2 < W  <=>  centroid < W/2, without fractional arithmetic.
  return static_cast<long long>(bbox.x1) + bbox.x2 < frame_width ? Region::Left : Region::Right;
}

std::vector<Detection> annotate_detections(std::vector<Detection> detections,
                                           const CameraCalibration& calib,
                                           const ClassHeightTable& heights) {
  for (Detection& d : detections) {
    if (d.annotated()) continue;
    const auto h = heights.height_of(d.class_label);
    if (!h) throw AnnotationError(d.class_label);
    d.distance_m = estimate_distance(calib.focal_px, *h, d.bbox.height());
    d.region = assign_region(d.bbox, calib.frame_width);
  }
  std::stable_sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (*a.distance_m != *b.distance_m) return *a.distance_m < *b.distance_m;
    return a.confidence > b.confidence;
  });
  return detections;
}

}  // namespace scenefuse
