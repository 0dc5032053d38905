#include "scenefuse/config.hpp"

#include <climits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace scenefuse {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Object view that rejects keys it was never asked about.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("must be an object");
  }

  // Call once every known key has been read.
  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key + " must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(key + " must be finite");
    return d;
  }

  int integer(const std::string& key, int fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(key + " must be an integer");
    const auto i = v->get<std::int64_t>();
    if (i < INT32_MIN || i > INT32_MAX) fail(key + " out of range");
    return static_cast<int>(i);
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key + " must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::string fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key + " must be a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(key + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) fail(key + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing(const fs::path& base, const std::string& p, const std::string& what) {
  fs::path path = resolve(base, p);
  if (!fs::exists(path)) throw ConfigError(what + ": " + path.string() + " does not exist");
  return path;
}

std::uint32_t frame_id(Section& s) {
  const json* v = s.get("frame_id");
  if (!v) s.fail("frame_id is required");
  std::uint64_t id = 0;
  if (v->is_number_unsigned()) {
    id = v->get<std::uint64_t>();
  } else if (v->is_string()) {
    const auto text = v->get<std::string>();
    std::size_t used = 0;
    try {
      id = std::stoull(text, &used, 0);
    } catch (const std::exception&) {
      s.fail("bad frame_id '" + text + "'");
    }
    if (used != text.size()) s.fail("bad frame_id '" + text + "'");
  } else {
    s.fail("frame_id must be a number or a hex string");
  }
  if (id > 0x1FFFFFFF) s.fail("frame_id out of range");
  return static_cast<std::uint32_t>(id);
}

SignalSpec signal_spec(const json& j, const std::string& name) {
  Section s(j, "can_signals." + name);
  SignalSpec spec;
  spec.name = name;
  spec.frame_id = frame_id(s);
  spec.start_bit = s.integer("start_bit", 0);
  spec.bit_length = s.integer("bit_length", 8);
  const std::string order = s.string("byte_order", "little_endian");
  if (order == "little_endian") {
    spec.byte_order = ByteOrder::LittleEndian;
  } else if (order == "big_endian") {
    spec.byte_order = ByteOrder::BigEndian;
  } else {
    s.fail("byte_order must be little_endian or big_endian");
  }
  spec.is_signed = s.boolean("signed", false);
  spec.scale = s.number("scale", 1.0);
  spec.offset = s.number("offset", 0.0);
  spec.unit = s.string("unit", "");
  s.done();
  try {
    check_spec(spec);
  } catch (const CanDecodeError& e) {
    s.fail(e.what());
  }
  return spec;
}

SignalMap signal_map(const json& j) {
  Section s(j, "can_signals");
  auto required = [&](const char* name) {
    const json* v = s.get(name);
    if (!v) s.fail(std::string(name) + " is required");
    return signal_spec(*v, name);
  };
  SignalMap m;
  m.speed = required("speed");
  m.brake = required("brake");
  m.steering = required("steering");
  s.done();
  return m;
}

GeocodeConfig geocode(const json& j, const fs::path& base) {
  Section s(j, "geocode");
  GeocodeConfig g;
  const std::string mode = s.string("mode", "fixture");
  if (mode == "fixture") {
    g.mode = GeocodeMode::Fixture;
  } else if (mode == "online") {
    g.mode = GeocodeMode::Online;
  } else {
    s.fail("mode must be fixture or online");
  }
  g.url_template = s.string("url_template", "");
  g.response_field_path = s.string("response_field_path", g.response_field_path);
  g.rate_limit_per_s = s.number("rate_limit_per_s", g.rate_limit_per_s);
  if (auto p = s.string("fixture_path", ""); !p.empty()) g.fixture_path = existing(base, p, "geocode.fixture_path");
  if (auto p = s.string("cache_path", ""); !p.empty()) g.cache_path = resolve(base, p);
  g.max_retries = s.integer("max_retries", g.max_retries);
  g.backoff = std::chrono::milliseconds(s.integer("backoff_ms", static_cast<int>(g.backoff.count())));
  g.timeout = std::chrono::milliseconds(s.integer("timeout_ms", static_cast<int>(g.timeout.count())));
  g.user_agent = s.string("user_agent", g.user_agent);
  s.done();
  try {
    check_config(g);
  } catch (const GeocodeError& e) {
    s.fail(e.what());
  }
  return g;
}

BackendConfig backend(const json& j, std::size_t index) {
  Section s(j, "backends[" + std::to_string(index) + "]");
  BackendConfig b;
  b.backend_id = s.string("id", "");
  if (b.backend_id.empty()) s.fail("id is required");
  const auto kind = parse_backend_kind(s.string("kind", ""));
  if (!kind) s.fail("kind must be text_only or multimodal");
  b.kind = *kind;
  const std::string transport = s.string("transport", "http");
  if (transport == "http") {
    b.transport = Transport::Http;
  } else if (transport == "mock") {
    b.transport = Transport::Mock;
  } else {
    s.fail("transport must be http or mock");
  }
  b.endpoint_url = s.string("endpoint_url", "");
  b.model_name = s.string("model", "");
  b.auth_env_var = s.string("auth_env", "");
  b.response_text_path = s.string("response_text_path", b.response_text_path);
  b.image_mime = s.string("image_mime", b.image_mime);
  b.timeout_ms = s.integer("timeout_ms", b.timeout_ms);
  b.max_retries = s.integer("max_retries", b.max_retries);
  if (const json* v = s.get("backoff_ms")) {
    if (!v->is_array()) s.fail("backoff_ms must be an array of integers");
    b.backoff_ms.clear();
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0 || e.get<std::int64_t>() > INT32_MAX) {
        s.fail("backoff_ms must be an array of non-negative integers");
      }
      b.backoff_ms.push_back(e.get<int>());
    }
  }
  if (s.get("mock_delay_ms")) b.mock_delay_ms = s.integer("mock_delay_ms", 0);
  if (const json* v = s.get("mock_seed")) {
    if (!v->is_number_unsigned()) s.fail("mock_seed must be a non-negative integer");
    b.mock_seed = v->get<std::uint64_t>();
  }
  s.done();
  check_backend(b);
  return b;
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config is not valid JSON");

  PipelineConfig c;
  Section root(doc, "config");

  if (const json* cam = root.get("camera")) {
    Section s(*cam, "camera");
    c.camera.focal_px = s.number("focal_px", c.camera.focal_px);
    c.camera.frame_width = s.integer("frame_width", c.camera.frame_width);
    c.camera.frame_height = s.integer("frame_height", c.camera.frame_height);
    if (c.camera.focal_px <= 0) s.fail("focal_px must be positive");
    if (c.camera.frame_width <= 0 || c.camera.frame_height <= 0) s.fail("frame size must be positive");
    s.done();
  }

  if (const json* h = root.get("class_heights")) {
    if (!h->is_object()) throw ConfigError("class_heights must be an object");
    for (const auto& [label, value] : h->items()) {
      if (!value.is_number() || !(value.get<double>() > 0) || !std::isfinite(value.get<double>())) {
        throw ConfigError("class_heights." + label + " must be a positive number");
      }
      c.class_heights.set(label, value.get<double>());
    }
  }

  if (const json* k = root.get("known_classes")) {
    c.validation.known_classes.clear();
    if (!k->is_array()) throw ConfigError("known_classes must be an array of strings");
    for (const auto& e : *k) {
      if (!e.is_string()) throw ConfigError("known_classes must be an array of strings");
      c.validation.known_classes.insert(e.get<std::string>());
    }
  }

  c.validation.presence_threshold = root.number("presence_threshold", c.validation.presence_threshold);
  if (c.validation.presence_threshold < 0 || c.validation.presence_threshold > 1) {
    throw ConfigError("presence_threshold must lie in [0, 1]");
  }
  c.alignment_tolerance_ms = root.number("alignment_tolerance_ms", c.alignment_tolerance_ms);
  if (c.alignment_tolerance_ms < 0) throw ConfigError("alignment_tolerance_ms must be non-negative");

  if (const json* v = root.get("can_signals")) c.can_signals = signal_map(*v);
  if (const json* v = root.get("geocode")) c.geocode = geocode(*v, base);

  if (const json* v = root.get("backends")) {
    if (!v->is_array()) throw ConfigError("backends must be an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < v->size(); ++i) {
      BackendConfig b = backend((*v)[i], i);
      if (!ids.insert(b.backend_id).second) throw ConfigError("duplicate backend id '" + b.backend_id + "'");
      c.backends.push_back(std::move(b));
    }
  }

  if (const json* v = root.get("synonyms")) {
    if (!v->is_object()) throw ConfigError("synonyms must be an object");
    SynonymMap merged;
    const SynonymMap defaults = SynonymMap::defaults();
    for (const auto& [canonical, tokens] : defaults.entries()) {
      if (!v->contains(canonical)) merged.add(canonical, tokens);
    }
    for (const auto& [canonical, tokens] : v->items()) {
      if (!tokens.is_array()) throw ConfigError("synonyms." + canonical + " must be an array of strings");
      std::vector<std::string> list;
      for (const auto& t : tokens) {
        if (!t.is_string() || t.get<std::string>().empty()) {
          throw ConfigError("synonyms." + canonical + " must be an array of non-empty strings");
        }
        list.push_back(t.get<std::string>());
      }
      merged.add(canonical, std::move(list));
    }
    c.synonyms = std::move(merged);
  }

  c.risk_keywords = root.strings("risk_keywords", c.risk_keywords);
  if (c.risk_keywords.empty()) throw ConfigError("risk_keywords must not be empty");
  c.instruction = root.string("instruction", c.instruction);
  if (c.instruction.empty()) throw ConfigError("instruction must not be empty");

  if (const json* p = root.get("paths")) {
    Section s(*p, "paths");
    if (auto v = s.string("records", ""); !v.empty()) c.paths.records = existing(base, v, "paths.records");
    if (auto v = s.string("annotations", ""); !v.empty()) {
      c.paths.annotations = existing(base, v, "paths.annotations");
    }
    if (auto v = s.string("can_log", ""); !v.empty()) c.paths.can_log = existing(base, v, "paths.can_log");
    if (auto v = s.string("output_dir", ""); !v.empty()) c.paths.output_dir = resolve(base, v);
    s.done();
  }
  root.done();
  if (c.paths.can_log && !c.can_signals) throw ConfigError("paths.can_log needs a can_signals section");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace scenefuse
