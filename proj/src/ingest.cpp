#include "scenefuse/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scenefuse/segstats.hpp"

namespace scenefuse {

using nlohmann::json;

const SceneRecord* RecordStream::find(std::string_view scenario_id) const noexcept {
  for (const auto& r : records) {
    if (r.scenario_id == scenario_id) return &r;
  }
  return nullptr;
}

namespace {

// Field-level failure while decoding one record line.
class RecordError : public Error {
 public:
  using Error::Error;
};

const json& require(const json& obj, const char* key) {
  if (!obj.is_object()) throw RecordError("expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw RecordError(std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw RecordError(std::string("field '") + what + "' must be a number");
  return v.get<double>();
}

int integer(const json& v, const char* what) {
  if (!v.is_number_integer()) throw RecordError(std::string("field '") + what + "' must be an integer");
  const auto i = v.get<std::int64_t>();
  if (i < -(1LL << 30) || i > (1LL << 30)) throw RecordError(std::string("field '") + what + "' out of range");
  return static_cast<int>(i);
}

std::string text(const json& v, const char* what) {
  if (!v.is_string()) throw RecordError(std::string("field '") + what + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const char* what) {
  if (!v.is_boolean()) throw RecordError(std::string("field '") + what + "' must be a boolean");
  return v.get<bool>();
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.class_label = text(require(j, "class"), "class");
  d.confidence = number(require(j, "confidence"), "confidence");
  const json& b = require(j, "bbox");
  if (!b.is_array() || b.size() != 4) throw RecordError("field 'bbox' must be [x1, y1, x2, y2]");
  d.bbox = {integer(b[0], "bbox"), integer(b[1], "bbox"), integer(b[2], "bbox"), integer(b[3], "bbox")};
  if (auto it = j.find("distance_m"); it != j.end() && !it->is_null()) d.distance_m = number(*it, "distance_m");
  if (auto it = j.find("region"); it != j.end() && !it->is_null()) {
    d.region = parse_region(text(*it, "region"));
    if (!d.region) throw RecordError("field 'region' must be left or right");
  }
  return d;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SegmentationSummary segmentation_from_json(const json& j, const IngestOptions& opt) {
  const double threshold = opt.validation.presence_threshold;
  if (j.is_object() && j.contains("label_map")) {
    const auto pgm = resolve(opt.base_dir, text(j["label_map"], "label_map"));
    const auto table = resolve(opt.base_dir, text(require(j, "class_table"), "class_table"));
    return coverage(load_label_map(pgm, table), threshold);
  }
  SegmentationSummary s;
  s.road_global_fraction = number(require(j, "road_global"), "road_global");
  const json& classes = require(j, "classes");
  if (!classes.is_array()) throw RecordError("field 'classes' must be an array");
  for (const json& c : classes) {
    s.stats.push_back(make_class_stat(text(require(c, "class"), "class"),
                                      number(require(c, "left"), "left"),
                                      number(require(c, "right"), "right"), threshold));
  }
  return s;
}

Telemetry telemetry_from_json(const json& j) {
  return Telemetry{number(require(j, "speed_kmh"), "speed_kmh"),
                   boolean(require(j, "brake_pressed"), "brake_pressed"),
                   number(require(j, "steering_angle_deg"), "steering_angle_deg")};
}

struct Decoded {
  SceneRecord record;
  std::vector<std::string> notes;
};

Decoded record_from_json(const json& j, const IngestOptions& opt) {
  Decoded out;
  SceneRecord& r = out.record;
  r.scenario_id = text(require(j, "scenario_id"), "scenario_id");
  const json& ts = require(j, "timestamp_ms");
  if (!ts.is_number_integer()) throw RecordError("field 'timestamp_ms' must be an integer");
  r.timestamp_ms = ts.get<std::int64_t>();

  const json& frame = require(j, "frame");
  if (auto it = frame.find("path"); it != frame.end() && !it->is_null()) r.frame_ref = text(*it, "frame.path");
  r.frame_width = integer(require(frame, "width"), "frame.width");
  r.frame_height = integer(require(frame, "height"), "frame.height");

  if (auto it = j.find("detections"); it != j.end()) {
    if (!it->is_array()) throw RecordError("field 'detections' must be an array");
    for (const json& d : *it) r.detections.push_back(detection_from_json(d));
  }
  r.segmentation = segmentation_from_json(require(j, "segmentation"), opt);

  const json& g = require(j, "geofix");
  r.geofix.lat = number(require(g, "lat"), "geofix.lat");
  r.geofix.lon = number(require(g, "lon"), "geofix.lon");
  if (auto it = g.find("address"); it != g.end() && !it->is_null()) r.geofix.address = text(*it, "geofix.address");

  const auto tel = j.find("telemetry");
  const auto can = j.find("can_log");
  const bool has_tel = tel != j.end() && !tel->is_null();
  const bool has_can = can != j.end() && !can->is_null();
  if (has_tel) {
    r.telemetry = telemetry_from_json(*tel);
    if (has_can) out.notes.push_back("record carries telemetry and a CAN log; using the inline telemetry");
  } else if (has_can) {
    if (!opt.signals) throw RecordError("record references a CAN log but no signal map is configured");
    const auto path = resolve(opt.base_dir, text(*can, "can_log"));
    std::ifstream in(path);
    if (!in) throw RecordError("cannot open CAN log " + path.string());
    const CanLogParse log = parse_can_log(in);
    r.telemetry = decode_telemetry(log.frames, *opt.signals);
  } else if (!opt.telemetry_series.empty()) {
    const double t = static_cast<double>(r.timestamp_ms);
    const auto a = align(std::span<const double>(&t, 1), opt.telemetry_series, opt.tolerance_ms);
    if (!a.front().aligned()) throw RecordError("no telemetry sample within tolerance");
    r.telemetry = opt.telemetry_series[*a.front().telemetry_index].telemetry;
  } else {
    throw RecordError("missing telemetry");
  }
  return out;
}

json detection_to_json(const Detection& d) {
  json j = {{"class", d.class_label},
            {"confidence", d.confidence},
            {"bbox", {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2}}};
  if (d.distance_m) j["distance_m"] = *d.distance_m;
  if (d.region) j["region"] = std::string(to_string(*d.region));
  return j;
}

}  // namespace

IngestResult parse_scene_records(std::istream& in, const IngestOptions& opt) {
  IngestResult out;
  out.stream.tolerance_ms = opt.tolerance_ms;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::int64_t> last_ts;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::vector<Diagnostic> errors;
    auto error = [&](std::string msg) {
      if (opt.strict) throw ParseError(line_no, msg);
      errors.push_back({line_no, std::move(msg)});
    };

    Decoded decoded;
    try {
      decoded = record_from_json(json::parse(line), opt);
    } catch (const json::parse_error&) {
      error("malformed JSON");
    } catch (const json::exception& e) {
      error(std::string("bad record: ") + e.what());
    } catch (const Error& e) {
      error(e.what());
    }
    if (errors.empty()) {
      for (auto& note : decoded.notes) out.diagnostics.push_back({line_no, std::move(note)});
      for (const Violation& v : validate_record(decoded.record, opt.validation)) {
        std::string msg = v.field + ": " + v.message;
        if (v.severity == Violation::Severity::Warning) {
          out.diagnostics.push_back({line_no, "warning: " + msg});
        } else {
          error(std::move(msg));
        }
      }
    }
    if (errors.empty() && last_ts && decoded.record.timestamp_ms < *last_ts) {
      error("timestamp decreases within stream");
    }
    if (!errors.empty()) {
      ++out.rejected;
      out.diagnostics.insert(out.diagnostics.end(), errors.begin(), errors.end());
      continue;
    }
    last_ts = decoded.record.timestamp_ms;
    out.stream.records.push_back(std::move(decoded.record));
  }
  return out;
}

IngestResult load_scene_records(const std::filesystem::path& path, IngestOptions options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open record file " + path.string());
  if (options.base_dir.empty()) options.base_dir = path.parent_path();
  IngestResult r = parse_scene_records(in, options);
  r.stream.source = path;
  return r;
}

std::string serialize_record(const SceneRecord& r) {
  json detections = json::array();
  for (const Detection& d : r.detections) detections.push_back(detection_to_json(d));
  json classes = json::array();
  for (const SegClassStat& s : r.segmentation.stats) {
    classes.push_back({{"class", s.class_label}, {"left", s.left_fraction}, {"right", s.right_fraction}});
  }
  json geofix = {{"lat", r.geofix.lat}, {"lon", r.geofix.lon}};
  if (r.geofix.address) geofix["address"] = *r.geofix.address;

  json j;
  j["scenario_id"] = r.scenario_id;
  j["timestamp_ms"] = r.timestamp_ms;
  j["frame"] = {{"path", r.frame_ref ? json(*r.frame_ref) : json(nullptr)},
                {"width", r.frame_width},
                {"height", r.frame_height}};
  j["detections"] = std::move(detections);
  j["segmentation"] = {{"road_global", r.segmentation.road_global_fraction}, {"classes", std::move(classes)}};
  j["telemetry"] = {{"speed_kmh", r.telemetry.speed_kmh},
                    {"brake_pressed", r.telemetry.brake_pressed},
                    {"steering_angle_deg", r.telemetry.steering_angle_deg}};
  j["geofix"] = std::move(geofix);
  // Keys come out alphabetically, so the line is stable across runs.
  return j.dump();
}

void write_scene_records(std::ostream& out, std::span<const SceneRecord> records) {
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

std::vector<Alignment> align(std::span<const double> frames, std::span<const double> tel,
                             double tolerance_ms) {
  if (!std::is_sorted(frames.begin(), frames.end())) throw Error("align: frame timestamps unsorted");
  if (!std::is_sorted(tel.begin(), tel.end())) throw Error("align: telemetry timestamps unsorted");

  std::vector<Alignment> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double t = frames[i];
    const auto hi = std::lower_bound(tel.begin(), tel.end(), t);
    std::optional<std::size_t> best;
    double best_gap = INFINITY;
    if (hi != tel.begin()) {
      // Earliest sample among equal timestamps just before t.
      const auto lo = std::lower_bound(tel.begin(), hi, *(hi - 1));
      best = static_cast<std::size_t>(lo - tel.begin());
      best_gap = t - *lo;
    }
    if (hi != tel.end() && *hi - t < best_gap) {
      best = static_cast<std::size_t>(hi - tel.begin());
      best_gap = *hi - t;
    }
    Alignment a{i, std::nullopt};
    if (best && best_gap <= tolerance_ms) a.telemetry_index = best;
    out.push_back(a);
  }
  return out;
}

std::vector<Alignment> align(std::span<const double> frames, std::span<const TimedTelemetry> telemetry,
                             double tolerance_ms) {
  std::vector<double> ts;
  ts.reserve(telemetry.size());
  for (const auto& s : telemetry) ts.push_back(s.timestamp_ms);
  return align(frames, ts, tolerance_ms);
}

}  // namespace scenefuse
