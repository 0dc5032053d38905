#include "scenefuse/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

#include <json.hpp>

#include "json_path.hpp"
#include "scenefuse/text.hpp"

namespace scenefuse {

std::string_view to_string(BackendKind kind) noexcept {
  return kind == BackendKind::TextOnly ? "text_only" : "multimodal";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept {
  if (s == "text_only") return BackendKind::TextOnly;
  if (s == "multimodal") return BackendKind::Multimodal;
  return std::nullopt;
}

void check_backend(const BackendConfig& b) {
  const std::string who = "backend '" + b.backend_id + "': ";
  if (b.backend_id.empty()) throw ConfigError("backend id must not be empty");
  if (b.timeout_ms <= 0) throw ConfigError(who + "timeout_ms must be positive");
  if (b.max_retries < 0) throw ConfigError(who + "max_retries must be non-negative");
  if (b.transport == Transport::Mock) {
    if (b.mock_delay_ms && *b.mock_delay_ms < 0) throw ConfigError(who + "mock_delay_ms must be non-negative");
    return;
  }
  if (b.mock_delay_ms || b.mock_seed) throw ConfigError(who + "mock fields are only valid for mock back ends");
  if (b.endpoint_url.empty()) throw ConfigError(who + "endpoint_url is required");
  if (b.backoff_ms.empty()) throw ConfigError(who + "backoff_ms must not be empty");
}

SceneFacts facts_from_record(const SceneRecord& record) {
  SceneFacts f;
  for (const Detection& d : record.detections) {
    if (!d.annotated()) throw Error("facts need annotated detections");
    f.objects.push_back({d.class_label, d.confidence, *d.distance_m, *d.region});
  }
  if (const SegClassStat* s = record.segmentation.find("sidewalk")) {
    f.sidewalk_left = s->present_left;
    f.sidewalk_right = s->present_right;
  }
  return f;
}

SceneFacts facts_from_prompt(std::string_view text) {
  SceneFacts f;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    static constexpr std::string_view kSidewalk = "Sidewalk Left = ";
    if (line.starts_with(kSidewalk)) {
      const auto right = line.find("; Right = ");
      f.sidewalk_left = line.substr(kSidewalk.size()).starts_with("True");
      f.sidewalk_right = right != std::string_view::npos && line.substr(right + 10).starts_with("True");
      continue;
    }
    const auto conf = line.find(" (conf ");
    const auto dist = line.find(") | dist: ");
    const auto region = line.find(" m; region: ");
    if (conf == std::string_view::npos || dist == std::string_view::npos || region == std::string_view::npos ||
        !(conf < dist && dist < region)) {
      continue;
    }
    SceneFacts::Object o;
    o.class_label = std::string(line.substr(0, conf));
    const auto r = parse_region(line.substr(region + 12));
    if (!r) continue;
    o.region = *r;
    try {
      o.confidence = std::stod(std::string(line.substr(conf + 7, dist - conf - 7)));
      o.distance_m = std::stod(std::string(line.substr(dist + 10, region - dist - 10)));
    } catch (const std::exception&) {
      continue;
    }
    f.objects.push_back(std::move(o));
  }
  return f;
}

namespace {

bool is_motor_vehicle(std::string_view c) {
  return c == "car" || c == "bus" || c == "truck" || c == "motorcycle";
}

std::string noun(std::string_view c) { return c == "person" ? "pedestrian" : std::string(c); }

}  // namespace

MockOutput mock_generate(const SceneFacts& facts, std::uint64_t seed) {
  std::vector<const SceneFacts::Object*> by_distance;
  for (const auto& o : facts.objects) by_distance.push_back(&o);
  std::stable_sort(by_distance.begin(), by_distance.end(),
                   [](const auto* a, const auto* b) { return a->distance_m < b->distance_m; });

  const SceneFacts::Object* hazard = nullptr;
  bool hazard_unprotected = false;
  for (const auto* o : by_distance) {
    const bool person = o->class_label == "person";
    const bool no_sidewalk = person && !(o->region == Region::Left ? facts.sidewalk_left : facts.sidewalk_right);
    const bool risky = (person && o->distance_m < 10.0) || (is_motor_vehicle(o->class_label) && o->distance_m < 5.0) ||
                       no_sidewalk;
    if (risky) {
      hazard = o;
      hazard_unprotected = no_sidewalk;
      break;
    }
  }

  std::string inventory;
  if (!by_distance.empty()) {
    std::vector<std::pair<std::string, int>> counts;
    for (const auto* o : by_distance) {
      const std::string n = noun(o->class_label);
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& p) { return p.first == n; });
      if (it == counts.end()) {
        counts.emplace_back(n, 1);
      } else {
        ++it->second;
      }
    }
    inventory = " Objects in view: ";
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i) inventory += ", ";
      inventory += counts[i].first + " (" + std::to_string(counts[i].second) + ")";
    }
    inventory += ".";
  }

  MockOutput out;
  if (!hazard) {
    out.text = "No hazards detected." + inventory;
    return out;
  }
  static constexpr std::string_view kOpeners[] = {"Warning", "Caution", "Alert"};
  out.risk = true;
  out.text = std::string(kOpeners[seed % 3]) + ": " + noun(hazard->class_label) + " at " +
             format_fixed2(hazard->distance_m) + " m on the " + std::string(to_string(hazard->region));
  if (hazard_unprotected) out.text += ", with no sidewalk on that side";
  out.text += ". Slow down and cover the brake." + inventory;
  return out;
}

const std::vector<std::string>& default_risk_keywords() {
  static const std::vector<std::string> kKeywords = {"warning", "caution", "alert", "brake", "danger", "slow down"};
  return kKeywords;
}

bool classify_risk(std::string_view text, std::span<const std::string> keywords) {
  return std::any_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return contains_phrase(text, k); });
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string mock_text(const PromptText& prompt, const BackendConfig& b) {
  const int delay = b.mock_delay_ms.value_or(0);
  if (delay > b.timeout_ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(b.timeout_ms));
    throw DispatchError(DispatchError::Kind::Timeout,
                        "backend '" + b.backend_id + "' timed out after " + std::to_string(b.timeout_ms) + " ms");
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  return mock_generate(facts_from_prompt(prompt.full_text), b.mock_seed.value_or(0)).text;
}

std::string request_body(const PromptText& prompt, ImageBytes image, const BackendConfig& b) {
  using nlohmann::json;
  json content;
  if (image) {
    content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt.full_text}});
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + b.image_mime + ";base64," + base64_encode(*image)}}}});
  } else {
    content = prompt.full_text;
  }
  json body = {{"model", b.model_name}, {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
  return body.dump();
}

std::string http_text(const PromptText& prompt, ImageBytes image, const BackendConfig& b,
                      const DispatchOptions& opt) {
  using K = DispatchError::Kind;
  HttpRequest req;
  req.method = "POST";
  req.url = b.endpoint_url;
  req.timeout = std::chrono::milliseconds(b.timeout_ms);
  req.body = request_body(prompt, image, b);
  if (!b.auth_env_var.empty()) {
    const char* token = std::getenv(b.auth_env_var.c_str());
    if (!token || !*token) {
      throw DispatchError(K::Auth, "backend '" + b.backend_id + "': environment variable " + b.auth_env_var +
                                       " is not set");
    }
    req.headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }

  HttpResponse resp;
  for (int attempt = 0; attempt <= b.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto i = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), b.backoff_ms.size() - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(b.backoff_ms[i]));
    }
    resp = opt.transport(req);
    if (resp.ok()) break;
    const bool retryable = resp.transport_failure() || resp.status == 429 || resp.status >= 500;
    if (!retryable) break;
  }

  const std::string who = "backend '" + b.backend_id + "': ";
  if (!resp.ok()) {
    if (resp.timed_out) throw DispatchError(K::Timeout, who + "request timed out");
    if (resp.transport_failure()) throw DispatchError(K::Http, who + "request failed: " + resp.error);
    throw DispatchError(K::Http, who + "HTTP " + std::to_string(resp.status));
  }
  const auto body = nlohmann::json::parse(resp.body, nullptr, false);
  if (body.is_discarded()) throw DispatchError(K::MalformedResponse, who + "response is not JSON");
  auto text = detail::string_at_path(body, b.response_text_path);
  if (!text || text->empty()) {
    throw DispatchError(K::MalformedResponse, who + "no text at '" + b.response_text_path + "'");
  }
  return *text;
}

}  // namespace

Alert dispatch(const PromptText& prompt, ImageBytes image, const BackendConfig& backend,
               const DispatchOptions& options) {
  check_backend(backend);
  if (image && backend.kind == BackendKind::TextOnly) {
    throw DispatchError(DispatchError::Kind::Contract,
                        "backend '" + backend.backend_id + "' is text-only and cannot take an image");
  }
  const auto start = Clock::now();
  std::string text = backend.transport == Transport::Mock ? mock_text(prompt, backend)
                                                          : http_text(prompt, image, backend, options);
  Alert a;
  a.latency_ms = elapsed_ms(start);
  a.scenario_id = options.scenario_id;
  a.backend_id = backend.backend_id;
  a.backend_kind = std::string(to_string(backend.kind));
  a.risk_flag = classify_risk(text, options.risk_keywords);
  a.text = std::move(text);
  return a;
}

FanOutError::FanOutError(std::vector<BackendOutcome> outcomes)
    : Error([&] {
        std::string msg = "all back ends failed";
        for (const auto& o : outcomes) msg += "; " + o.backend_id + ": " + o.error;
        return msg;
      }()),
      outcomes_(std::move(outcomes)) {}

std::vector<BackendOutcome> fan_out(const PromptText& prompt, ImageBytes image,
                                    std::span<const BackendConfig> backends, const DispatchOptions& options) {
  if (backends.empty()) throw ConfigError("fan_out needs at least one backend");

  std::vector<std::future<Alert>> pending;
  pending.reserve(backends.size());
  for (const BackendConfig& b : backends) {
    const ImageBytes img = b.kind == BackendKind::Multimodal ? image : std::nullopt;
    pending.push_back(std::async(std::launch::async, [&prompt, img, &b, &options] {
      return dispatch(prompt, img, b, options);
    }));
  }

  std::vector<BackendOutcome> out;
  bool any_ok = false;
  for (std::size_t i = 0; i < backends.size(); ++i) {
    BackendOutcome o{backends[i].backend_id, backends[i].kind, std::nullopt, {}};
    try {
      o.alert = pending[i].get();
      any_ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    out.push_back(std::move(o));
  }
  if (!any_ok) throw FanOutError(std::move(out));
  return out;
}

}  // namespace scenefuse
