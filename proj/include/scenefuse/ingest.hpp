#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scenefuse/canbus.hpp"
#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

inline constexpr double kDefaultAlignmentToleranceMs = 50.0;

struct RecordStream {
  std::vector<SceneRecord> records;
  std::filesystem::path source;
  double tolerance_ms = kDefaultAlignmentToleranceMs;

  const SceneRecord* find(std::string_view scenario_id) const noexcept;
};

struct IngestOptions {
  bool strict = false;
  ValidationOptions validation;
  // Resolves "can_log" references inside records.
  std::optional<SignalMap> signals;
  // External telemetry aligned by timestamp to records that carry none.
  std::vector<TimedTelemetry> telemetry_series;
  double tolerance_ms = kDefaultAlignmentToleranceMs;
  // Base for relative paths inside records (label maps, CAN logs).
  std::filesystem::path base_dir;
};

struct IngestResult {
  RecordStream stream;
  std::vector<Diagnostic> diagnostics;
  std::size_t rejected = 0;
};

// One JSON record object per line; blank lines are skipped. Every record is
// run through validate_record. Lenient mode drops records with errors and
// keeps a diagnostic; strict mode throws ParseError on the first error.
IngestResult parse_scene_records(std::istream& in, const IngestOptions& options = {});
IngestResult load_scene_records(const std::filesystem::path& path, IngestOptions options = {});

// Canonical single-line JSON form of a record (inline segmentation and telemetry).
std::string serialize_record(const SceneRecord& record);
void write_scene_records(std::ostream& out, std::span<const SceneRecord> records);

struct Alignment {
  std::size_t frame_index = 0;
  std::optional<std::size_t> telemetry_index;

  bool aligned() const noexcept { return telemetry_index.has_value(); }
  bool operator==(const Alignment&) const = default;
};

// Nearest telemetry sample within tolerance for each frame; equidistant
// samples resolve to the earlier one. Both inputs must be sorted.
std::vector<Alignment> align(std::span<const double> frame_ts_ms,
                             std::span<const double> telemetry_ts_ms, double tolerance_ms);
std::vector<Alignment> align(std::span<const double> frame_ts_ms,
                             std::span<const TimedTelemetry> telemetry, double tolerance_ms);

}  // namespace scenefuse
