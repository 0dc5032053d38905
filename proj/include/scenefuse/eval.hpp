#pragma once

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class EvalError : public Error {
 public:
  using Error::Error;
};

// Canonical entity -> surface tokens that count as a mention.
class SynonymMap {
 public:
  SynonymMap() = default;
  static SynonymMap defaults();

  // Throws ConfigError when the canonical term is already present.
  void add(std::string canonical, std::vector<std::string> tokens);
  // Canonical term first, then its synonyms; unknown terms map to themselves.
  std::vector<std::string> tokens_for(std::string_view canonical) const;
  bool mentioned(std::string_view text, std::string_view canonical) const;

  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const noexcept {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

struct EvalResult {
  std::string scenario_id;
  std::string backend_id;
  std::string backend_kind;
  bool risk_flag = false;
  bool expected_risk = false;
  bool risk_match = false;
  double entity_coverage = 0.0;
  double latency_ms = 0.0;
  std::vector<std::string> missing_entities;
};

// Coverage is vacuously 1.0 for annotations without critical entities.
EvalResult score(const Alert& alert, const HumanAnnotation& annotation, const SynonymMap& synonyms);

struct LatencyRow {
  std::string scenario_id;
  std::string backend_kind;
  std::size_t n = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

// Smallest sample with at least pct% of the samples at or below it.
double nearest_rank(std::span<const double> sorted_samples, double pct);

// One row per (scenario, kind), ordered by scenario then kind.
std::vector<LatencyRow> latency_report(std::span<const EvalResult> results);

enum class ReportFormat { Text, Csv };

// Scenario rows, one column group (mean, p50, p95, n) per back-end kind
// present. CSV output is the long form, one line per row.
std::string render_latency_report(std::span<const LatencyRow> rows, ReportFormat format);

// Columns: Scenario, Backend, Risk?, Match, Entity coverage, Latency.
std::string summarize(std::span<const EvalResult> results, ReportFormat format);

struct MatchCount {
  std::size_t total = 0;
  std::size_t matched = 0;
};
MatchCount count_matches(std::span<const EvalResult> results);

// Line-delimited JSON: {"scenario_id", "risk", "critical_entities", "summary"}.
std::vector<HumanAnnotation> parse_annotations(std::istream& in);

// One line of an alerts file: an alert, or the error a back end reported.
struct AlertLine {
  Alert alert;
  std::optional<std::string> error;
};

// Latency is not part of the alerts file; it is kept in a sidecar so that
// mock runs produce byte-identical alert files.
std::string serialize_alert_line(const AlertLine& line);
std::string serialize_latency_line(const Alert& alert);
std::vector<AlertLine> parse_alert_lines(std::istream& in);
// Fills latency_ms from a sidecar stream, matched by (scenario_id, backend_id).
void apply_latencies(std::istream& sidecar, std::vector<AlertLine>& lines);

}  // namespace scenefuse
