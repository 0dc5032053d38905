#include "scenefuse/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "scenefuse/text.hpp"

namespace scenefuse {

using nlohmann::json;

SynonymMap SynonymMap::defaults() {
  SynonymMap m;
  m.add("person", {"pedestrian", "pedestrians", "people", "persons"});
  m.add("bicycle", {"bicycles", "cyclist", "cyclists", "bike", "bikes"});
  m.add("traffic light", {"traffic lights", "traffic signal", "signal", "signals"});
  m.add("car", {"cars", "vehicle", "vehicles"});
  m.add("bus", {"buses"});
  m.add("truck", {"trucks", "lorry"});
  m.add("motorcycle", {"motorcycles", "motorbike"});
  return m;
}

void SynonymMap::add(std::string canonical, std::vector<std::string> tokens) {
  if (canonical.empty()) throw ConfigError("synonym map: empty canonical term");
  if (entries_.contains(canonical)) throw ConfigError("synonym map: duplicate canonical term '" + canonical + "'");
  entries_.emplace(std::move(canonical), std::move(tokens));
}

std::vector<std::string> SynonymMap::tokens_for(std::string_view canonical) const {
  std::vector<std::string> out{std::string(canonical)};
  if (auto it = entries_.find(canonical); it != entries_.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

bool SynonymMap::mentioned(std::string_view text, std::string_view canonical) const {
  for (const auto& t : tokens_for(canonical)) {
    if (contains_phrase(text, t)) return true;
  }
  return false;
}

EvalResult score(const Alert& alert, const HumanAnnotation& annotation, const SynonymMap& synonyms) {
  if (alert.scenario_id != annotation.scenario_id) {
    throw EvalError("scenario mismatch: alert '" + alert.scenario_id + "' vs annotation '" +
                    annotation.scenario_id + "'");
  }
  EvalResult r;
  r.scenario_id = alert.scenario_id;
  r.backend_id = alert.backend_id;
  r.backend_kind = alert.backend_kind;
  r.risk_flag = alert.risk_flag;
  r.expected_risk = annotation.risk;
  r.risk_match = alert.risk_flag == annotation.risk;
  r.latency_ms = alert.latency_ms;

  std::size_t hit = 0;
  for (const auto& e : annotation.critical_entities) {
    if (synonyms.mentioned(alert.text, e)) {
      ++hit;
    } else {
      r.missing_entities.push_back(e);
    }
  }
  r.entity_coverage = annotation.critical_entities.empty()
                          ? 1.0
                          : static_cast<double>(hit) / static_cast<double>(annotation.critical_entities.size());
  return r;
}

double nearest_rank(std::span<const double> sorted, double pct) {
  if (sorted.empty()) return 0.0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<LatencyRow> latency_report(std::span<const EvalResult> results) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : results) groups[{r.scenario_id, r.backend_kind}].push_back(r.latency_ms);

  std::vector<LatencyRow> rows;
  for (auto& [key, samples] : groups) {
    std::sort(samples.begin(), samples.end());
    LatencyRow row;
    row.scenario_id = key.first;
    row.backend_kind = key.second;
    row.n = samples.size();
    row.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    // Guard against summation rounding leaving the mean outside its group.
    row.mean_ms = std::clamp(row.mean_ms, samples.front(), samples.back());
    row.p50_ms = nearest_rank(samples, 50.0);
    row.p95_ms = nearest_rank(samples, 95.0);
    row.min_ms = samples.front();
    row.max_ms = samples.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                         ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string l;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) l += "  ";
      l += cells[i];
      if (i + 1 < cells.size()) l.append(width[i] - cells[i].size(), ' ');
    }
    out += l + '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& r : rows) line(r);
  return out;
}

}  // namespace

std::string render_latency_report(std::span<const LatencyRow> rows, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
      cells.push_back({r.scenario_id, r.backend_kind, std::to_string(r.n), fixed(r.mean_ms, 1), fixed(r.p50_ms, 1),
                       fixed(r.p95_ms, 1)});
    }
    return render_table({"scenario", "kind", "n", "mean_ms", "p50_ms", "p95_ms"}, cells, format);
  }

  std::vector<std::string> scenarios;
  std::vector<std::string> kinds;
  for (const auto& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario_id) == scenarios.end()) {
      scenarios.push_back(r.scenario_id);
    }
    if (std::find(kinds.begin(), kinds.end(), r.backend_kind) == kinds.end()) kinds.push_back(r.backend_kind);
  }
  // Text-only columns first, then multimodal, then anything else by name.
  auto rank = [](const std::string& k) { return k == "text_only" ? 0 : k == "multimodal" ? 1 : 2; };
  std::sort(kinds.begin(), kinds.end(),
            [&](const std::string& a, const std::string& b) { return std::pair(rank(a), a) < std::pair(rank(b), b); });
  std::vector<std::string> header{"Scenario"};
  for (const auto& k : kinds) {
    for (const char* col : {" mean (ms)", " p50 (ms)", " p95 (ms)", " n"}) header.push_back(k + col);
  }
  std::vector<std::vector<std::string>> cells;
  for (const auto& s : scenarios) {
    std::vector<std::string> line{s};
    for (const auto& k : kinds) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const LatencyRow& r) { return r.scenario_id == s && r.backend_kind == k; });
      if (it == rows.end()) {
        line.insert(line.end(), {"-", "-", "-", "0"});
      } else {
        line.insert(line.end(),
                    {fixed(it->mean_ms, 1), fixed(it->p50_ms, 1), fixed(it->p95_ms, 1), std::to_string(it->n)});
      }
    }
    cells.push_back(std::move(line));
  }
  return render_table(header, cells, format);
}

std::string summarize(std::span<const EvalResult> results, ReportFormat format) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : results) {
    cells.push_back({r.scenario_id, r.backend_id, r.risk_flag ? "yes" : "no", r.risk_match ? "yes" : "no",
                     fixed(r.entity_coverage, 2), fixed(r.latency_ms, 1) + " ms"});
  }
  if (format == ReportFormat::Csv) {
    for (auto& c : cells) c.back() = fixed(results[&c - cells.data()].latency_ms, 1);
    return render_table({"scenario", "backend", "risk", "match", "entity_coverage", "latency_ms"}, cells, format);
  }
  return render_table({"Scenario", "Backend", "Risk?", "Match", "Entity coverage", "Latency"}, cells, format);
}

MatchCount count_matches(std::span<const EvalResult> results) {
  MatchCount c;
  c.total = results.size();
  c.matched = static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const EvalResult& r) { return r.risk_match; }));
  return c;
}

namespace {

template <typename F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

}  // namespace

std::vector<HumanAnnotation> parse_annotations(std::istream& in) {
  std::vector<HumanAnnotation> out;
  for_each_json_line(in, [&](const json& j) {
    HumanAnnotation a;
    a.scenario_id = j.at("scenario_id").get<std::string>();
    a.risk = j.at("risk").get<bool>();
    a.critical_entities = j.value("critical_entities", std::vector<std::string>{});
    a.summary = j.value("summary", std::string{});
    if (a.risk && a.critical_entities.empty()) {
      throw Error("annotation '" + a.scenario_id + "' has risk but no critical entities");
    }
    out.push_back(std::move(a));
  });
  return out;
}

std::string serialize_alert_line(const AlertLine& line) {
  json j = {{"scenario_id", line.alert.scenario_id},
            {"backend_id", line.alert.backend_id},
            {"backend_kind", line.alert.backend_kind}};
  if (line.error) {
    j["error"] = *line.error;
  } else {
    j["text"] = line.alert.text;
    j["risk_flag"] = line.alert.risk_flag;
  }
  return j.dump();
}

std::string serialize_latency_line(const Alert& alert) {
  return json{{"scenario_id", alert.scenario_id}, {"backend_id", alert.backend_id}, {"latency_ms", alert.latency_ms}}
      .dump();
}

std::vector<AlertLine> parse_alert_lines(std::istream& in) {
  std::vector<AlertLine> out;
  for_each_json_line(in, [&](const json& j) {
    AlertLine l;
    l.alert.scenario_id = j.at("scenario_id").get<std::string>();
    l.alert.backend_id = j.at("backend_id").get<std::string>();
    l.alert.backend_kind = j.value("backend_kind", std::string{});
    if (j.contains("error")) {
      l.error = j.at("error").get<std::string>();
    } else {
      l.alert.text = j.at("text").get<std::string>();
      l.alert.risk_flag = j.at("risk_flag").get<bool>();
      l.alert.latency_ms = j.value("latency_ms", 0.0);
    }
    out.push_back(std::move(l));
  });
  return out;
}

void apply_latencies(std::istream& sidecar, std::vector<AlertLine>& lines) {
  for_each_json_line(sidecar, [&](const json& j) {
    const auto sid = j.at("scenario_id").get<std::string>();
    const auto bid = j.at("backend_id").get<std::string>();
    const double ms = j.at("latency_ms").get<double>();
    for (auto& l : lines) {
      if (l.alert.scenario_id == sid && l.alert.backend_id == bid) l.alert.latency_ms = ms;
    }
  });
}

}  // namespace scenefuse
