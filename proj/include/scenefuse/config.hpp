#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenefuse/canbus.hpp"
#include "scenefuse/error.hpp"
#include "scenefuse/eval.hpp"
#include "scenefuse/geocode.hpp"
#include "scenefuse/geometry.hpp"
#include "scenefuse/ingest.hpp"
#include "scenefuse/llm.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

struct PipelinePaths {
  std::optional<std::filesystem::path> records;
  std::optional<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> can_log;
  std::optional<std::filesystem::path> output_dir;
};

struct PipelineConfig {
  CameraCalibration camera;
  ClassHeightTable class_heights = ClassHeightTable::defaults();
  ValidationOptions validation;
  double alignment_tolerance_ms = kDefaultAlignmentToleranceMs;
  std::optional<SignalMap> can_signals;
  std::optional<GeocodeConfig> geocode;
  std::vector<BackendConfig> backends;
  SynonymMap synonyms = SynonymMap::defaults();
  std::vector<std::string> risk_keywords = default_risk_keywords();
  std::string instruction{kDefaultInstruction};
  PipelinePaths paths;
};

// JSON document; see README for the schema. Relative paths resolve against
// base_dir. Unknown keys, malformed values and input paths that do not exist
// raise ConfigError.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace scenefuse
