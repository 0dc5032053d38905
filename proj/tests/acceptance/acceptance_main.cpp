// Runs each acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scenefuse/canbus.hpp"
#include "scenefuse/cli.hpp"
#include "scenefuse/config.hpp"
#include "scenefuse/eval.hpp"
#include "scenefuse/geometry.hpp"
#include "scenefuse/ingest.hpp"
#include "scenefuse/llm.hpp"
#include "scenefuse/promptgen.hpp"
#include "scenefuse/segstats.hpp"
#include "test_support.hpp"

using namespace scenefuse;
using testsupport::fixture;
using testsupport::slurp;
using testsupport::spit;

namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t0) { return std::chrono::duration<double>(SteadyClock::now() - t0).count(); }

// Empty on success, otherwise the first failure found.
using Outcome = std::optional<std::string>;

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---- distances ----

Outcome distances() {
  struct Row {
    const char* cls;
    double conf;
    BoundingBox box;
    double dist;
    Region region;
  };
  const Row table[] = {
      {"person", 0.89, {1400, 725, 1504, 952}, 5.99, Region::Right},
      {"person", 0.86, {1568, 726, 1635, 933}, 6.57, Region::Right},
      {"car", 0.80, {803, 589, 866, 641}, 23.08, Region::Left},
      {"car", 0.55, {750, 551, 818, 597}, 26.09, Region::Left},
  };
  const auto t0 = SteadyClock::now();
  std::vector<Detection> dets;
  for (const auto& r : table) {
    Detection d;
    d.class_label = r.cls;
    d.confidence = r.conf;
    d.bbox = r.box;
    dets.push_back(d);
  }
  const ClassHeightTable heights({{"person", 1.7}, {"car", 1.5}});
  const auto out = annotate_detections(dets, CameraCalibration{800.0, 1920, 1080}, heights);
  const double elapsed = seconds_since(t0);
  if (out.size() != 4) return "expected 4 detections";
  for (std::size_t i = 0; i < 4; ++i) {
    if (!out[i].annotated()) return "detection not annotated";
    if (std::abs(*out[i].distance_m - table[i].dist) > 0.01) {
      return fmt("row %.0f: distance %.4f vs %.2f", double(i), *out[i].distance_m, table[i].dist);
    }
    if (*out[i].region != table[i].region) return "row " + std::to_string(i) + ": wrong region";
  }
  if (elapsed >= 1.0) return fmt("took %.3f s", elapsed);
  return {};
}

// ---- prompt goldens ----

struct RefDetection {
  std::string cls;
  double conf, dist;
  std::string region;
};
struct RefSeg {
  std::string name, left, right;  // "False" or a percentage
};
struct RefPrompt {
  std::string brake;
  long speed;
  double steering;
  std::string location;
  std::vector<RefDetection> detections;
  double road;
  std::vector<RefSeg> seg;
};

// Transcribed from the published prompt boxes.
std::vector<RefPrompt> reference_prompts() {
  return {
      {"not pressed", 40, -0.00065, "Av. Monteiro Lobato, Ponta Grossa, Brazil.",
       {{"person", 0.89, 5.99, "right"},
        {"person", 0.86, 6.57, "right"},
        {"car", 0.80, 23.08, "left"},
        {"car", 0.55, 26.09, "left"}},
       35.07,
       {{"Sidewalk", "False", "False"}, {"Vegetation", "6.64", "6.35"}, {"Terrain", "2.52", "5.69"}}},
      {"pressed", 18, -1.0151, "Rua Professor Geraldo Ataliba, Vila Olímpia, Itaim Bibi, São Paulo, Brazil.",
       {{"bus", 0.96, 2.26, "left"},
        {"car", 0.93, 4.29, "right"},
        {"truck", 0.90, 6.59, "right"},
        {"car", 0.90, 10.43, "right"},
        {"car", 0.82, 14.29, "right"},
        {"car", 0.70, 36.36, "left"}},
       26.67,
       {{"Sidewalk", "0.21", "0.47"}, {"Vegetation", "8.37", "12.93"}}},
      {"not pressed", 32, -1.0151, "Av. Presidente Juscelino Kubitschek, Vila Olímpia, São Paulo, Brazil.",
       {{"car", 0.88, 3.95, "left"},
        {"car", 0.89, 9.60, "right"},
        {"car", 0.90, 11.11, "left"},
        {"bicycle", 0.87, 11.29, "right"},
        {"car", 0.73, 15.58, "right"},
        {"car", 0.86, 17.65, "left"},
        {"car", 0.80, 21.43, "left"},
        {"car", 0.75, 21.82, "right"},
        {"traffic light", 0.79, 23.53, "right"},
        {"traffic light", 0.82, 24.39, "left"},
        {"traffic light", 0.73, 25.00, "left"},
        {"car", 0.78, 27.91, "left"},
        {"bus", 0.74, 28.57, "right"}},
       39.92,
       {{"Sidewalk", "0.3", "0.49"},
        {"Pedestrians", "0.12", "0.34"},
        {"Building", "17.63", "15.58"},
        {"Vegetation", "3.87", "5.09"}}},
  };
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

bool same_number(const std::string& a, const std::string& b) { return std::stod(a) == std::stod(b); }

Outcome check_against_reference(const std::string& golden, const RefPrompt& p) {
  const auto lines = lines_of(golden);
  auto find = [&](const std::string& prefix) -> std::optional<std::string> {
    for (const auto& l : lines) {
      if (l.rfind(prefix, 0) == 0) return l.substr(prefix.size());
    }
    return std::nullopt;
  };

  std::smatch m;
  const auto vehicle = find("Vehicle: ");
  static const std::regex vre(R"(Brake pedal = (pressed|not pressed) \| Speed = (\d+) km/h \| Steering angle = (\S+)\xC2\xB0)");
  if (!vehicle || !std::regex_match(*vehicle, m, vre)) return "vehicle line missing or malformed";
  if (m[1] != p.brake || std::stol(m[2]) != p.speed || std::stod(m[3]) != p.steering) return "vehicle values differ";

  if (find("Location: ") != p.location) return "location differs";

  static const std::regex dre(R"((.+) \(conf ([0-9.]+)\) \| dist: ([0-9.]+) m; region: (left|right))");
  std::vector<RefDetection> got;
  for (const auto& l : lines) {
    if (std::regex_match(l, m, dre)) got.push_back({m[1], std::stod(m[2]), std::stod(m[3]), m[4]});
  }
  if (got.size() != p.detections.size()) return "detection count differs";
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& a = got[i];
    const auto& b = p.detections[i];
    if (a.cls != b.cls || a.conf != b.conf || a.dist != b.dist || a.region != b.region) {
      return "detection row " + std::to_string(i + 1) + " differs (" + a.cls + ")";
    }
    if (i && got[i - 1].dist > a.dist) return "detections not sorted by distance";
  }

  const auto road = find("Road (global) ");
  if (!road || road->back() != '%' || std::stod(*road) != p.road) return "road (global) differs";

  static const std::regex sre(R"((\w+) Left = (?:True \()?([0-9.]+|False)%?\)?; Right = (?:True \()?([0-9.]+|False)%?\)?)");
  std::vector<RefSeg> seg;
  for (const auto& l : lines) {
    if (std::regex_match(l, m, sre)) seg.push_back({m[1], m[2], m[3]});
  }
  if (seg.size() != p.seg.size()) return "segmentation row count differs";
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const auto& a = seg[i];
    const auto& b = p.seg[i];
    auto eq = [](const std::string& x, const std::string& y) {
      return x == "False" || y == "False" ? x == y : same_number(x, y);
    };
    if (a.name != b.name || !eq(a.left, b.left) || !eq(a.right, b.right)) return "segmentation row " + a.name + " differs";
  }
  return {};
}

Outcome prompt_goldens() {
  const auto cfg = load_config(fixture("pipeline.json"));
  auto loaded = load_scene_records(fixture("scenarios.jsonl"));
  if (!loaded.diagnostics.empty()) return "fixture records produce diagnostics";
  if (loaded.stream.records.size() != 3) return "expected 3 fixture records";
  const auto reference = reference_prompts();
  for (std::size_t i = 0; i < 3; ++i) {
    SceneRecord rec = loaded.stream.records[i];
    const CameraCalibration calib{cfg.camera.focal_px, rec.frame_width, rec.frame_height};
    rec.detections = annotate_detections(rec.detections, calib, cfg.class_heights);
    const std::string id = "scenario-" + std::to_string(i + 1);
    const std::string golden = slurp(fixture("goldens/" + id + ".prompt.txt"));
    if (render_prompt(rec, cfg.instruction).full_text != golden) return id + ": rendered prompt differs from golden";
    if (auto bad = check_against_reference(golden, reference[i])) return id + ": " + *bad;
  }
  return {};
}

// ---- segmentation coverage ----

Outcome coverage_oracle() {
  std::mt19937_64 rng(20240611);
  for (int iter = 0; iter < 200; ++iter) {
    const LabelMap m = testsupport::random_label_map(rng, 2, 128);
    const auto got = count_coverage(m);
    const auto want = testsupport::brute_force_coverage(m);
    const std::string where = "map " + std::to_string(iter) + " (" + std::to_string(m.width) + "x" +
                              std::to_string(m.height) + ")";
    if (got.left_area != want.left_area || got.right_area != want.right_area) return where + ": half areas differ";
    if (got.classes.size() != want.by_name.size()) return where + ": class set differs";
    std::uint64_t left = 0, right = 0;
    for (const auto& c : got.classes) {
      const auto it = want.by_name.find(c.class_label);
      if (it == want.by_name.end()) return where + ": unexpected class " + c.class_label;
      if (c.left != it->second.first || c.right != it->second.second) return where + ": counts differ for " + c.class_label;
      left += c.left;
      right += c.right;
    }
    const auto total = static_cast<std::uint64_t>(m.width) * static_cast<std::uint64_t>(m.height);
    if (left != got.left_area || right != got.right_area || left + right != total) {
      return where + ": pixel conservation violated";
    }
  }
  return {};
}

// ---- CAN ----

Outcome can_round_trip() {
  std::mt19937_64 rng(4242);
  for (int iter = 0; iter < 1000; ++iter) {
    const auto c = testsupport::random_spec_case(rng);
    CanFrame f;
    f.frame_id = c.spec.frame_id;
    f.dlc = 8;
    f.data = encode_signal(c.value, c.spec);
    if (f.data != testsupport::oracle_place(c.raw, c.spec)) return "case " + std::to_string(iter) + ": wire layout differs";
    const double back = decode_signal(f, c.spec);
    if (std::abs(back - c.value) > std::abs(c.spec.scale)) {
      return "case " + std::to_string(iter) + fmt(": %.9g decoded as %.9g (scale %g)", c.value, back, c.spec.scale);
    }
    if (back != testsupport::oracle_decode(f.data, c.spec)) return "case " + std::to_string(iter) + ": decode disagrees with oracle";
  }

  const auto cfg = load_config(fixture("pipeline.json"));
  std::istringstream log(slurp(fixture("can/table1.log")));
  const auto parsed = parse_can_log(log);
  if (!parsed.diagnostics.empty()) return "fixture log has diagnostics";
  const Telemetry t = decode_telemetry(parsed.frames, *cfg.can_signals);
  if (std::abs(t.speed_kmh - 40.0) > 1e-9 || !t.brake_pressed || std::abs(t.steering_angle_deg + 0.5) > 1e-9) {
    return fmt("fixture log decodes to (%.4f km/h, brake %.0f, %.4f deg)", t.speed_kmh, t.brake_pressed,
               t.steering_angle_deg);
  }
  return {};
}

// ---- latency harness ----

Outcome latency_property() {
  const auto t0 = SteadyClock::now();
  const auto cfg = load_config(fixture("pipeline.json"));
  auto loaded = load_scene_records(fixture("scenarios.jsonl"));
  std::vector<BackendConfig> backends = {cfg.backends.at(0), cfg.backends.at(1)};
  backends[0].mock_delay_ms = 80;
  backends[1].mock_delay_ms = 160;
  if (backends[0].kind != BackendKind::TextOnly || backends[1].kind != BackendKind::Multimodal) {
    return "fixture back ends are not text-only + multimodal";
  }
  const std::uint8_t frame[] = {0xFF, 0xD8, 0xFF, 0xD9};

  std::vector<EvalResult> samples;
  for (int rep = 0; rep < 10; ++rep) {
    for (SceneRecord rec : loaded.stream.records) {
      rec.detections = annotate_detections(rec.detections, {}, cfg.class_heights);
      const auto prompt = render_prompt(rec, cfg.instruction);
      DispatchOptions opt;
      opt.scenario_id = rec.scenario_id;
      for (const auto& o : fan_out(prompt, std::span<const std::uint8_t>(frame), backends, opt)) {
        if (!o.alert) return rec.scenario_id + " / " + o.backend_id + ": " + o.error;
        const double delay = o.backend_id == backends[0].backend_id ? 80.0 : 160.0;
        if (o.alert->latency_ms < delay || o.alert->latency_ms > delay + 50.0) {
          return rec.scenario_id + " / " + o.backend_id + fmt(": latency %.1f ms outside [%.0f, %.0f]",
                                                                o.alert->latency_ms, delay, delay + 50);
        }
        EvalResult e;
        e.scenario_id = rec.scenario_id;
        e.backend_id = o.backend_id;
        e.backend_kind = o.alert->backend_kind;
        e.latency_ms = o.alert->latency_ms;
        samples.push_back(e);
      }
    }
  }
  const auto rows = latency_report(samples);
  if (rows.size() != 6) return "expected 6 report rows";
  for (const auto& rec : loaded.stream.records) {
    const LatencyRow *text = nullptr, *multi = nullptr;
    for (const auto& r : rows) {
      if (r.scenario_id != rec.scenario_id) continue;
      (r.backend_kind == "text_only" ? text : multi) = &r;
    }
    if (!text || !multi || text->n != 10 || multi->n != 10) return rec.scenario_id + ": incomplete rows";
    if (!(text->mean_ms < multi->mean_ms)) {
      return rec.scenario_id + fmt(": text-only mean %.1f >= multimodal mean %.1f", text->mean_ms, multi->mean_ms);
    }
  }
  const std::string report = render_latency_report(rows, ReportFormat::Text);
  if (report.find("text_only mean (ms)") == std::string::npos) return "report lacks text-only column";
  const double elapsed = seconds_since(t0);
  if (elapsed >= 30.0) return fmt("took %.1f s", elapsed);
  return {};
}

// ---- evaluation ----

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  return code;
}

Outcome eval_alignment() {
  testsupport::TempDir dir;
  const std::string cfg = fixture("pipeline.json").string();
  const std::string alerts = (dir / "alerts.jsonl").string();
  if (int code = cli({"--config", cfg, "run", "--out", alerts}); code != kExitOk) {
    return "run exited " + std::to_string(code);
  }
  std::string csv;
  if (int code = cli({"--config", cfg, "--format", "csv", "eval", "--alerts", alerts}, &csv); code != kExitOk) {
    return "eval exited " + std::to_string(code);
  }
  const auto rows = lines_of(csv);
  std::set<std::string> scenarios;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::istringstream in(rows[i]);
    for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
    if (cells.size() != 6) return "unexpected eval row: " + rows[i];
    if (cells[2] != "yes" || cells[3] != "yes") return cells[0] + " / " + cells[1] + ": risk mismatch";
    if (cells[4] != "1.00") return cells[0] + " / " + cells[1] + ": entity coverage " + cells[4];
    scenarios.insert(cells[0]);
  }
  if (scenarios != std::set<std::string>{"scenario-1", "scenario-2", "scenario-3"}) return "not all scenarios scored";

  const auto annotations = lines_of(slurp(fixture("annotations.jsonl")));
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    std::string flipped;
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      std::string l = annotations[j];
      if (j == i) {
        const auto pos = l.find("\"risk\": true");
        if (pos == std::string::npos) return "annotation " + std::to_string(i + 1) + " has no risk = true";
        l.replace(pos, 12, "\"risk\": false");
      }
      flipped += l + "\n";
    }
    const auto path = dir / ("flipped" + std::to_string(i) + ".jsonl");
    spit(path, flipped);
    if (int code = cli({"--config", cfg, "eval", "--alerts", alerts, "--annotations", path.string()});
        code != kExitContentFailure) {
      return "flipping annotation " + std::to_string(i + 1) + " gave exit " + std::to_string(code);
    }
  }
  return {};
}

// ---- fuzz ----

std::string mutate(std::string s, std::mt19937_64& rng) {
  const int edits = std::uniform_int_distribution<int>(1, 8)(rng);
  for (int e = 0; e < edits; ++e) {
    const auto byte = static_cast<char>(rng() & 0xFF);
    const std::size_t pos = s.empty() ? 0 : rng() % (s.size() + 1);
    switch (rng() % 5) {
      case 0:
        if (pos < s.size()) s[pos] = byte;
        break;
      case 1:
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), byte);
        break;
      case 2:
        if (pos < s.size()) s.erase(pos, 1 + rng() % 4);
        break;
      case 3:
        if (pos < s.size()) s[pos] = static_cast<char>(s[pos] ^ (1 << (rng() % 8)));
        break;
      default:
        s.resize(pos);
        break;
    }
  }
  return s;
}

bool content_line(const std::string& l) {
  const auto p = l.find_first_not_of(" \t\r");
  return p != std::string::npos;
}

Outcome fuzz() {
  std::mt19937_64 rng(777);
  const auto records = lines_of(slurp(fixture("scenarios.jsonl")));
  const auto can = lines_of(slurp(fixture("can/table1.log")));
  IngestOptions opt;
  opt.base_dir = fixture("");
  opt.signals = load_config(fixture("pipeline.json")).can_signals;

  for (int iter = 0; iter < 10000; ++iter) {
    // Valid lines first, the mutated line last, so every failure belongs to it.
    const std::size_t keep = rng() % records.size();
    std::string text;
    for (std::size_t i = 0; i < keep; ++i) text += records[i] + "\n";
    const std::string bad = mutate(records[rng() % records.size()], rng);
    text += bad + "\n";
    const auto all = lines_of(text);
    const std::size_t first_bad = keep + 1;

    std::size_t content = 0;
    for (const auto& l : all) content += content_line(l);
    try {
      std::istringstream in(text);
      const auto r = parse_scene_records(in, opt);
      if (r.stream.records.size() + r.rejected != content) return "records: line accounting broken on iteration " + std::to_string(iter);
      std::set<std::size_t> flagged;
      for (const auto& d : r.diagnostics) {
        if (d.line < first_bad || d.line > all.size()) return "records: diagnostic on line " + std::to_string(d.line);
        if (d.message.rfind("warning: ", 0) != 0) flagged.insert(d.line);
      }
      if (flagged.size() != r.rejected) return "records: rejected line without a diagnostic";
    } catch (const std::exception& e) {
      return std::string("records: lenient parser threw: ") + e.what();
    }
    try {
      std::istringstream in(text);
      opt.strict = true;
      parse_scene_records(in, opt);
    } catch (const ParseError& e) {
      if (e.line() < first_bad || e.line() > all.size()) return "records: strict error on line " + std::to_string(e.line());
    } catch (const std::exception& e) {
      opt.strict = false;
      return std::string("records: strict parser threw non-parse error: ") + e.what();
    }
    opt.strict = false;

    const std::size_t ckeep = rng() % can.size();
    std::string ctext;
    for (std::size_t i = 0; i < ckeep; ++i) ctext += can[i] + "\n";
    ctext += mutate(can[rng() % can.size()], rng) + "\n";
    const auto clines = lines_of(ctext);
    std::size_t ccontent = 0;
    for (const auto& l : clines) {
      const auto p = l.find_first_not_of(" \t\r");
      ccontent += p != std::string::npos && l[p] != ';';
    }
    try {
      std::istringstream in(ctext);
      const auto r = parse_can_log(in);
      if (r.frames.size() + r.diagnostics.size() != ccontent) return "CAN: line accounting broken on iteration " + std::to_string(iter);
      for (const auto& d : r.diagnostics) {
        if (d.line < ckeep + 1 || d.line > clines.size()) return "CAN: diagnostic on line " + std::to_string(d.line);
      }
    } catch (const std::exception& e) {
      return std::string("CAN: lenient parser threw: ") + e.what();
    }
    try {
      std::istringstream in(ctext);
      parse_can_log(in, true);
    } catch (const ParseError& e) {
      if (e.line() < ckeep + 1 || e.line() > clines.size()) return "CAN: strict error on line " + std::to_string(e.line());
    } catch (const std::exception& e) {
      return std::string("CAN: strict parser threw non-parse error: ") + e.what();
    }
  }
  return {};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"distance reproduction", distances},
      {"prompt goldens", prompt_goldens},
      {"coverage oracle", coverage_oracle},
      {"CAN round trip", can_round_trip},
      {"latency harness property", latency_property},
      {"eval alignment", eval_alignment},
      {"fuzz robustness", fuzz},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = SteadyClock::now();
    Outcome result;
    try {
      result = run();
    } catch (const std::exception& e) {
      result = std::string("threw: ") + e.what();
    }
    const double elapsed = seconds_since(t0);
    if (result) {
      ++failed;
      std::printf("FAIL  %-26s %.2fs  %s\n", name, elapsed, result->c_str());
    } else {
      std::printf("PASS  %-26s %.2fs\n", name, elapsed);
    }
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
