#include "scenefuse/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "scenefuse/config.hpp"
#include "scenefuse/eval.hpp"
#include "scenefuse/geocode.hpp"
#include "scenefuse/geometry.hpp"
#include "scenefuse/ingest.hpp"
#include "scenefuse/llm.hpp"
#include "scenefuse/promptgen.hpp"
#include "scenefuse/replay.hpp"

namespace scenefuse {

namespace {

namespace fs = std::filesystem;

// Bad flags, missing inputs: exit code 2.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Content failure already reported to the user: exit code 1.
class ContentFailure : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string config_path;
  bool verbose = false;
  std::string format = "text";

  ReportFormat report_format() const { return format == "csv" ? ReportFormat::Csv : ReportFormat::Text; }
};

struct Session {
  Globals globals;
  PipelineConfig config;
  std::ostream& out;
  std::ostream& err;
  std::unique_ptr<ReverseGeocoder> geocoder;

  void note(const std::string& msg) const {
    if (globals.verbose) err << msg << '\n';
  }
};

fs::path input_path(const std::string& flag_value, const std::optional<fs::path>& configured, const char* what) {
  fs::path p;
  if (!flag_value.empty()) {
    p = flag_value;
  } else if (configured) {
    p = *configured;
  } else {
    throw UsageError(std::string("no ") + what + " file given (flag or config paths)");
  }
  if (!fs::exists(p)) throw UsageError(std::string(what) + " file not found: " + p.string());
  return p;
}

fs::path output_path(const std::string& flag_value, const Session& s, const char* default_name) {
  if (!flag_value.empty()) return flag_value;
  if (s.config.paths.output_dir) return *s.config.paths.output_dir / default_name;
  throw UsageError(std::string("no output location: pass --out or set paths.output_dir"));
}

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write " + p.string());
  return f;
}

fs::path sidecar_path(const fs::path& alerts) {
  return alerts.parent_path() / (alerts.stem().string() + ".latency.jsonl");
}

struct LoadedRecords {
  RecordStream stream;
  fs::path source;
  std::vector<Diagnostic> diagnostics;
  std::size_t rejected = 0;
};

std::vector<TimedTelemetry> external_telemetry(Session& s, const fs::path& log) {
  if (!s.config.can_signals) throw UsageError("a CAN log needs a can_signals config section");
  std::ifstream in(log);
  if (!in) throw UsageError("cannot open CAN log " + log.string());
  CanLogParse parsed = parse_can_log(in);
  for (const auto& d : parsed.diagnostics) s.err << log.string() << ":" << to_string(d) << '\n';
  std::stable_sort(parsed.frames.begin(), parsed.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp_ms < b.timestamp_ms; });
  return telemetry_series(parsed.frames, *s.config.can_signals);
}

// Loads, validates and annotates records. Strict parse errors surface as ParseError.
LoadedRecords load_records(Session& s, const std::string& records_flag, const std::string& can_log_flag,
                           std::optional<double> tolerance, bool strict) {
  LoadedRecords out;
  out.source = input_path(records_flag, s.config.paths.records, "records");

  IngestOptions opt;
  opt.strict = strict;
  opt.validation = s.config.validation;
  opt.signals = s.config.can_signals;
  opt.tolerance_ms = tolerance.value_or(s.config.alignment_tolerance_ms);
  if (opt.tolerance_ms < 0) throw UsageError("tolerance must be non-negative");
  std::optional<fs::path> log;
  if (!can_log_flag.empty()) {
    log = can_log_flag;
    if (!fs::exists(*log)) throw UsageError("CAN log not found: " + log->string());
  } else if (s.config.paths.can_log) {
    log = s.config.paths.can_log;
  }
  if (log) opt.telemetry_series = external_telemetry(s, *log);

  IngestResult r = load_scene_records(out.source, std::move(opt));
  out.diagnostics = std::move(r.diagnostics);
  out.rejected = r.rejected;
  out.stream = std::move(r.stream);

  for (SceneRecord& rec : out.stream.records) {
    CameraCalibration calib = s.config.camera;
    calib.frame_width = rec.frame_width;
    calib.frame_height = rec.frame_height;
    try {
      rec.detections = annotate_detections(std::move(rec.detections), calib, s.config.class_heights);
    } catch (const AnnotationError& e) {
      throw ContentFailure("record '" + rec.scenario_id + "': " + e.what());
    }
  }
  return out;
}

void print_diagnostics(const Session& s, const LoadedRecords& r) {
  for (const auto& d : r.diagnostics) s.err << r.source.string() << ":" << to_string(d) << '\n';
}

PromptText prompt_for(Session& s, const SceneRecord& record) {
  SceneRecord rec = record;
  if (!rec.geofix.address && s.config.geocode) {
    if (!s.geocoder) s.geocoder = std::make_unique<ReverseGeocoder>(*s.config.geocode);
    try {
      rec.geofix.address = s.geocoder->reverse(rec.geofix);
    } catch (const GeocodeError& e) {
      s.note("record '" + rec.scenario_id + "': " + e.what());
    }
  }
  std::vector<std::string> notes;
  PromptText p = render_prompt(rec, s.config.instruction, &notes);
  for (const auto& n : notes) s.note("record '" + rec.scenario_id + "': " + n);
  s.note("record '" + rec.scenario_id + "': prompt digest " + digest_hex(prompt_digest(p)));
  return p;
}

std::vector<std::uint8_t> frame_bytes(const Session& s, const SceneRecord& rec, const fs::path& records_file) {
  if (!rec.frame_ref) return {};
  fs::path p = *rec.frame_ref;
  if (p.is_relative()) p = records_file.parent_path() / p;
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    s.note("record '" + rec.scenario_id + "': frame " + p.string() + " not readable; sending text only");
    return {};
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<BackendConfig> select_backends(const Session& s, const std::vector<std::string>& filter) {
  if (s.config.backends.empty()) throw UsageError("no backends configured");
  std::vector<BackendConfig> out;
  for (const auto& b : s.config.backends) {
    if (filter.empty() || std::find(filter.begin(), filter.end(), b.backend_id) != filter.end()) out.push_back(b);
  }
  for (const auto& id : filter) {
    if (std::none_of(out.begin(), out.end(), [&](const BackendConfig& b) { return b.backend_id == id; })) {
      throw UsageError("unknown backend '" + id + "'");
    }
  }
  return out;
}

std::vector<BackendOutcome> dispatch_record(Session& s, const SceneRecord& rec, const fs::path& source,
                                            const std::vector<BackendConfig>& backends) {
  const PromptText prompt = prompt_for(s, rec);
  const std::vector<std::uint8_t> bytes = frame_bytes(s, rec, source);
  ImageBytes image;
  if (!bytes.empty()) image = std::span<const std::uint8_t>(bytes);
  DispatchOptions opt;
  opt.scenario_id = rec.scenario_id;
  opt.risk_keywords = s.config.risk_keywords;
  try {
    return fan_out(prompt, image, backends, opt);
  } catch (const FanOutError& e) {
    return e.outcomes();
  }
}

// ---- subcommands ----

struct IngestArgs {
  std::string records, can_log, out;
  std::optional<double> tolerance;
  bool strict = false;
};

int cmd_ingest(Session& s, const IngestArgs& a) {
  LoadedRecords r;
  try {
    r = load_records(s, a.records, a.can_log, a.tolerance, a.strict);
  } catch (const ParseError& e) {
    s.err << input_path(a.records, s.config.paths.records, "records").string() << ":" << e.what() << '\n';
    return kExitContentFailure;
  }
  print_diagnostics(s, r);
  if (r.stream.records.empty()) s.err << "warning: no records in " << r.source.string() << '\n';

  if (a.out.empty()) {
    write_scene_records(s.out, r.stream.records);
  } else {
    auto f = open_output(a.out);
    write_scene_records(f, r.stream.records);
  }
  s.err << "ingested " << r.stream.records.size() << " record(s), rejected " << r.rejected << '\n';
  return kExitOk;
}

struct PromptArgs {
  std::string records, id, out_dir;
  bool all = false;
};

int cmd_prompt(Session& s, const PromptArgs& a) {
  if (a.all == !a.id.empty()) throw UsageError("pass exactly one of --id or --all");
  LoadedRecords r = load_records(s, a.records, "", std::nullopt, false);
  print_diagnostics(s, r);

  if (!a.all) {
    const SceneRecord* rec = r.stream.find(a.id);
    if (!rec) throw UsageError("no record with id '" + a.id + "'");
    const PromptText p = prompt_for(s, *rec);
    if (a.out_dir.empty()) {
      s.out << p.full_text;
    } else {
      auto f = open_output(fs::path(a.out_dir) / (a.id + ".prompt.txt"));
      f << p.full_text;
    }
    return kExitOk;
  }

  fs::path dir = a.out_dir;
  if (dir.empty()) {
    if (!s.config.paths.output_dir) throw UsageError("--all needs --out-dir or paths.output_dir");
    dir = *s.config.paths.output_dir;
  }
  for (const SceneRecord& rec : r.stream.records) {
    const fs::path p = dir / (rec.scenario_id + ".prompt.txt");
    auto f = open_output(p);
    f << prompt_for(s, rec).full_text;
    s.out << p.string() << '\n';
  }
  return kExitOk;
}

struct RunArgs {
  std::string records, out;
  std::vector<std::string> backends;
};

int cmd_run(Session& s, const RunArgs& a) {
  const auto backends = select_backends(s, a.backends);
  const fs::path alerts_path = output_path(a.out, s, "alerts.jsonl");
  LoadedRecords r = load_records(s, a.records, "", std::nullopt, false);
  print_diagnostics(s, r);

  std::ostringstream alerts, latencies;
  std::size_t ok = 0, failed = 0;
  for (const SceneRecord& rec : r.stream.records) {
    for (const BackendOutcome& o : dispatch_record(s, rec, r.source, backends)) {
      AlertLine line;
      if (o.alert) {
        line.alert = *o.alert;
        latencies << serialize_latency_line(*o.alert) << '\n';
        ++ok;
        s.note(rec.scenario_id + " / " + o.backend_id + ": " + o.alert->text);
      } else {
        line.alert.scenario_id = rec.scenario_id;
        line.alert.backend_id = o.backend_id;
        line.alert.backend_kind = std::string(to_string(o.kind));
        line.error = o.error;
        ++failed;
        s.err << rec.scenario_id << " / " << o.backend_id << ": " << o.error << '\n';
      }
      alerts << serialize_alert_line(line) << '\n';
    }
  }
  open_output(alerts_path) << alerts.str();
  open_output(sidecar_path(alerts_path)) << latencies.str();
  s.out << "wrote " << ok << " alert(s) and " << failed << " error(s) to " << alerts_path.string() << '\n';
  return failed == 0 ? kExitOk : kExitContentFailure;
}

struct EvalArgs {
  std::string alerts, annotations, latencies;
};

int cmd_eval(Session& s, const EvalArgs& a) {
  std::optional<fs::path> default_alerts;
  if (s.config.paths.output_dir) default_alerts = *s.config.paths.output_dir / "alerts.jsonl";
  const fs::path alerts_path = input_path(a.alerts, default_alerts, "alerts");
  const fs::path ann_path = input_path(a.annotations, s.config.paths.annotations, "annotations");

  std::vector<AlertLine> lines;
  std::vector<HumanAnnotation> annotations;
  try {
    std::ifstream in(alerts_path);
    lines = parse_alert_lines(in);
  } catch (const ParseError& e) {
    throw UsageError(alerts_path.string() + ":" + e.what());
  }
  try {
    std::ifstream in(ann_path);
    annotations = parse_annotations(in);
  } catch (const ParseError& e) {
    throw UsageError(ann_path.string() + ":" + e.what());
  }
  const fs::path side = a.latencies.empty() ? sidecar_path(alerts_path) : fs::path(a.latencies);
  if (fs::exists(side)) {
    std::ifstream in(side);
    try {
      apply_latencies(in, lines);
    } catch (const ParseError& e) {
      throw UsageError(side.string() + ":" + e.what());
    }
  } else if (!a.latencies.empty()) {
    throw UsageError("latency file not found: " + side.string());
  }

  std::map<std::string, const HumanAnnotation*> by_id;
  for (const auto& ann : annotations) {
    if (!by_id.emplace(ann.scenario_id, &ann).second) {
      throw UsageError("duplicate annotation for '" + ann.scenario_id + "'");
    }
  }

  std::vector<EvalResult> results;
  std::size_t errors = 0;
  for (const AlertLine& l : lines) {
    auto it = by_id.find(l.alert.scenario_id);
    if (it == by_id.end()) throw UsageError("no annotation for scenario '" + l.alert.scenario_id + "'");
    if (l.error) {
      ++errors;
      s.err << l.alert.scenario_id << " / " << l.alert.backend_id << ": no alert (" << *l.error << ")\n";
      continue;
    }
    results.push_back(score(l.alert, *it->second, s.config.synonyms));
    for (const auto& m : results.back().missing_entities) {
      s.note(l.alert.scenario_id + " / " + l.alert.backend_id + ": missing entity '" + m + "'");
    }
  }

  s.out << summarize(results, s.globals.report_format());
  const MatchCount c = count_matches(results);
  const std::size_t total = c.total + errors;
  if (s.globals.report_format() == ReportFormat::Text) {
    s.out << "\nrisk match: " << c.matched << "/" << total << '\n';
  }
  return total > 0 && c.matched == total ? kExitOk : kExitContentFailure;
}

struct BenchArgs {
  std::string records, out;
  std::vector<std::string> backends;
  int reps = 10;
};

int cmd_bench(Session& s, const BenchArgs& a) {
  if (a.reps <= 0) throw UsageError("--reps must be positive");
  const auto backends = select_backends(s, a.backends);
  LoadedRecords r = load_records(s, a.records, "", std::nullopt, false);
  print_diagnostics(s, r);
  if (r.stream.records.empty()) throw UsageError("no records to benchmark");

  std::vector<EvalResult> samples;
  std::size_t failed = 0;
  for (int rep = 0; rep < a.reps; ++rep) {
    for (const SceneRecord& rec : r.stream.records) {
      for (const BackendOutcome& o : dispatch_record(s, rec, r.source, backends)) {
        if (!o.alert) {
          ++failed;
          s.err << rec.scenario_id << " / " << o.backend_id << ": " << o.error << '\n';
          continue;
        }
        EvalResult e;
        e.scenario_id = rec.scenario_id;
        e.backend_id = o.backend_id;
        e.backend_kind = o.alert->backend_kind;
        e.latency_ms = o.alert->latency_ms;
        samples.push_back(std::move(e));
      }
    }
  }

  // Keep scenarios in stream order rather than lexical order.
  std::vector<LatencyRow> rows;
  const auto all_rows = latency_report(samples);
  for (const SceneRecord& rec : r.stream.records) {
    for (const auto& row : all_rows) {
      if (row.scenario_id == rec.scenario_id) rows.push_back(row);
    }
  }
  const std::string report = render_latency_report(rows, s.globals.report_format());
  s.out << report;
  if (!a.out.empty()) open_output(a.out) << report;
  return failed == 0 ? kExitOk : kExitContentFailure;
}

struct ReplayArgs {
  std::string records, tcp;
  double speed = 1.0;
};

int cmd_replay(Session& s, const ReplayArgs& a) {
  if (!(a.speed > 0)) throw UsageError("--speed must be positive");
  std::optional<TcpLineEmitter> emitter;
  if (!a.tcp.empty()) {
    try {
      emitter.emplace(a.tcp);
    } catch (const NetworkError& e) {
      throw UsageError(e.what());
    }
  }
  LoadedRecords r = load_records(s, a.records, "", std::nullopt, false);
  print_diagnostics(s, r);
  if (r.stream.records.empty()) throw UsageError("no records to replay");

  RecordSink sink = emitter ? emitter->sink() : RecordSink([&](const SceneRecord& rec) {
    s.out << serialize_record(rec) << '\n' << std::flush;
  });
  const ReplayReport report = replay(r.stream, a.speed, sink);

  std::ostream& rep = emitter ? s.out : s.err;
  if (s.globals.verbose || emitter) {
    for (const auto& e : report.entries) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu %s scheduled %.1f ms actual %.1f ms", e.index, e.scenario_id.c_str(),
                    e.scheduled_ms, e.actual_ms);
      rep << buf << '\n';
    }
  }
  char summary[128];
  std::snprintf(summary, sizeof summary, "replayed %zu/%zu record(s), max lateness %.1f ms", report.entries.size(),
                r.stream.records.size(), report.max_lateness_ms());
  rep << summary << '\n';
  if (!report.completed) {
    s.err << "replay stopped: " << report.error << '\n';
    return kExitContentFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fuse driving-scene perception, telemetry and location into LLM prompts and alerts.", "scenefuse"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_flag("-v,--verbose", g.verbose, "Print notes and per-item detail to stderr");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "csv"}));

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate scene records and write the canonical stream");
  c_ingest->add_option("--records", ingest.records, "Record file (JSONL)");
  c_ingest->add_option("--can-log", ingest.can_log, "candump log aligned to records by timestamp");
  c_ingest->add_option("--tolerance", ingest.tolerance, "Alignment tolerance in ms");
  c_ingest->add_flag("--strict", ingest.strict, "Fail on the first bad record");
  c_ingest->add_option("--out", ingest.out, "Output file (default stdout)");

  PromptArgs prompt;
  auto* c_prompt = app.add_subcommand("prompt", "Render prompts");
  c_prompt->add_option("--records", prompt.records, "Record file (JSONL)");
  c_prompt->add_option("--id", prompt.id, "Scenario id");
  c_prompt->add_flag("--all", prompt.all, "Render every record to <out-dir>/<id>.prompt.txt");
  c_prompt->add_option("--out-dir", prompt.out_dir, "Directory for prompt files");

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Dispatch prompts to the configured back ends");
  c_run->add_option("--records", run.records, "Record file (JSONL)");
  c_run->add_option("--backend", run.backends, "Only these back-end ids");
  c_run->add_option("--out", run.out, "Alerts file (default <output_dir>/alerts.jsonl)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score alerts against human annotations");
  c_eval->add_option("--alerts", eval.alerts, "Alerts file");
  c_eval->add_option("--annotations", eval.annotations, "Annotation file (JSONL)");
  c_eval->add_option("--latencies", eval.latencies, "Latency sidecar (default next to the alerts)");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Measure back-end latency");
  c_bench->add_option("--records", bench.records, "Record file (JSONL)");
  c_bench->add_option("--backend", bench.backends, "Only these back-end ids");
  c_bench->add_option("--reps", bench.reps, "Repetitions per scenario")->capture_default_str();
  c_bench->add_option("--out", bench.out, "Also write the report here");

  ReplayArgs rep;
  auto* c_replay = app.add_subcommand("replay", "Replay records at their recorded pace");
  c_replay->add_option("--records", rep.records, "Record file (JSONL)");
  c_replay->add_option("--speed", rep.speed, "Speed factor (inf for as fast as possible)")->capture_default_str();
  c_replay->add_option("--tcp", rep.tcp, "Send record lines to host:port instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Session s{g, {}, out, err, nullptr};
    if (!g.config_path.empty()) s.config = load_config(g.config_path);

    if (c_ingest->parsed()) return cmd_ingest(s, ingest);
    if (c_prompt->parsed()) return cmd_prompt(s, prompt);
    if (c_run->parsed()) return cmd_run(s, run);
    if (c_eval->parsed()) return cmd_eval(s, eval);
    if (c_bench->parsed()) return cmd_bench(s, bench);
    if (c_replay->parsed()) return cmd_replay(s, rep);
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const GeocodeError& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == GeocodeError::Kind::Config ? kExitUsage : kExitContentFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitContentFailure;
  }
}

}  // namespace scenefuse
