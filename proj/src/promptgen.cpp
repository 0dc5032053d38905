#include "scenefuse/promptgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "scenefuse/segstats.hpp"

namespace scenefuse {

std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string format_percent(double fraction) { return format_fixed2(fraction * 100.0) + "%"; }

std::string format_steering(double degrees) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", degrees);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::string side_cell(const std::string& side, double fraction, bool present, bool is_sidewalk) {
  if (!is_sidewalk) return side + " = " + format_percent(fraction);
  return side + " = " + (present ? "True (" + format_percent(fraction) + ")" : std::string("False"));
}

std::string location_text(const GeoFix& g, std::vector<std::string>* notes) {
  if (g.address && !g.address->empty()) {
    std::string s = *g.address;
    if (s.back() != '.') s += '.';
    return s;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f, %.5f", g.lat, g.lon);
  if (notes) notes->push_back("no address for fix; rendering coordinates");
  return buf;
}

}  // namespace

PromptText render_prompt(const SceneRecord& record, std::string_view instruction,
                         std::vector<std::string>* notes) {
  std::vector<Detection> detections = record.detections;
  for (const Detection& d : detections) {
    if (!d.annotated()) throw PromptError("detection '" + d.class_label + "' has no distance/region");
  }
  std::stable_sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (*a.distance_m != *b.distance_m) return *a.distance_m < *b.distance_m;
    return a.confidence > b.confidence;
  });

  PromptText p;
  std::string& out = p.full_text;

  p.instruction_offset = out.size();
  out += "Instruction\n";
  out += instruction;
  out += "\n\n";

  const Telemetry& t = record.telemetry;
  p.vehicle_offset = out.size();
  out += "Vehicle: Brake pedal = ";
  out += t.brake_pressed ? "pressed" : "not pressed";
  out += " | Speed = " + std::to_string(std::llround(t.speed_kmh)) + " km/h";
  out += " | Steering angle = " + format_steering(t.steering_angle_deg) + "\xC2\xB0\n\n";

  p.location_offset = out.size();
  out += "Location: " + location_text(record.geofix, notes) + "\n\n";

  p.scene_offset = out.size();
  out += "Scene\n";
  if (detections.empty()) {
    out += "Object Detection: none\n";
  } else {
    out += "Object Detection (YOLOv8)\n";
    for (const Detection& d : detections) {
      out += d.class_label + " (conf " + format_fixed2(d.confidence) + ") | dist: " +
             format_fixed2(*d.distance_m) + " m; region: " + std::string(to_string(*d.region)) + "\n";
    }
  }

  out += "\nSegmentation (Cityscapes)\n";
  out += "Road (global) " + format_percent(record.segmentation.road_global_fraction) + "\n";
  for (const SegClassStat& s : summarize_for_prompt(record.segmentation)) {
    const bool sidewalk = s.class_label == kSidewalkClass;
    out += display_name(s.class_label) + " " + side_cell("Left", s.left_fraction, s.present_left, sidewalk) +
           "; " + side_cell("Right", s.right_fraction, s.present_right, sidewalk) + "\n";
  }
  return p;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t prompt_digest(const PromptText& prompt) noexcept { return fnv1a64(prompt.full_text); }

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace scenefuse
