#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// Raised when a detection's class has no entry in the height table.
class AnnotationError : public Error {
 public:
  explicit AnnotationError(std::string class_label)
      : Error("no class height for '" + class_label + "'"), class_label_(std::move(class_label)) {}

  const std::string& class_label() const noexcept { return class_label_; }

 private:
  std::string class_label_;
};

struct CameraCalibration {
  // Reproduces every distance of the reference Scenario 1 detection table.
  double focal_px = 800.0;
  int frame_width = 1920;
  int frame_height = 1080;
};

// Assumed real-world object heights in meters, keyed by class label.
class ClassHeightTable {
 public:
  ClassHeightTable() = default;
  explicit ClassHeightTable(std::map<std::string, double, std::less<>> heights);

  // person 1.7 and car 1.5 as in the reference setup; the rest are typical
  // physical dimensions.
  static ClassHeightTable defaults();

  std::optional<double> height_of(std::string_view class_label) const;
  void set(std::string class_label, double height_m);
  const std::map<std::string, double, std::less<>>& entries() const noexcept { return heights_; }

 private:
  std::map<std::string, double, std::less<>> heights_;
};

// Pinhole range estimate d = f * H / h.
double estimate_distance(double focal_px, double class_height_m, double bbox_height_px);

// Half-open split: centroids in [0, W/2) are Left, [W/2, W) are Right.
Region assign_region(const BoundingBox& bbox, int frame_width);

// Fills distance and region for every detection that lacks them (already
// annotated detections are kept verbatim), then orders by distance
// ascending, confidence descending, input order.
std::vector<Detection> annotate_detections(std::vector<Detection> detections,
                                           const CameraCalibration& calib,
                                           const ClassHeightTable& heights);

}  // namespace scenefuse
