#include "scenefuse/geocode.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json_path.hpp"

namespace scenefuse {

void check_config(const GeocodeConfig& c) {
  using K = GeocodeError::Kind;
  if (!(c.rate_limit_per_s > 0.0) || !std::isfinite(c.rate_limit_per_s)) {
    throw GeocodeError(K::Config, "geocode rate limit must be positive");
  }
  if (c.mode == GeocodeMode::Online) {
    if (c.url_template.find("{lat}") == std::string::npos || c.url_template.find("{lon}") == std::string::npos) {
      throw GeocodeError(K::Config, "geocode URL template needs {lat} and {lon} placeholders");
    }
  }
  if (c.max_retries < 0) throw GeocodeError(K::Config, "geocode max_retries must be non-negative");
}

std::string cache_key(double lat, double lon) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", v);
    std::string s = buf;
    if (s == "-0.00000") s = "0.00000";
    return s;
  };
  return fmt(lat) + "," + fmt(lon);
}

RateLimiter::RateLimiter(double rate_per_s, Clock& clock)
    : clock_(clock),
      capacity_(static_cast<std::size_t>(std::max(1.0, std::floor(rate_per_s)))),
      window_(std::chrono::nanoseconds(
          static_cast<std::int64_t>(std::ceil(static_cast<double>(capacity_) / rate_per_s * 1e9)))) {}

void RateLimiter::acquire() {
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_.now();
    while (!recent_.empty() && recent_.front() + window_ <= now) recent_.pop_front();
    if (recent_.size() < capacity_) {
      recent_.push_back(now);
      return;
    }
    const auto wait = recent_.front() + window_ - now;
    clock_.sleep_for(std::chrono::ceil<std::chrono::milliseconds>(wait));
  }
}

namespace {

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line[0] == '#') continue;
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

std::string replace_all(std::string s, std::string_view what, const std::string& with) {
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + with.size())) {
    s.replace(pos, what.size(), with);
  }
  return s;
}

double checked_rate(const GeocodeConfig& c) {
  check_config(c);
  return c.rate_limit_per_s;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ReverseGeocoder::ReverseGeocoder(GeocodeConfig config, HttpTransport transport, Clock& clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      clock_(clock),
      limiter_(checked_rate(config_), clock) {
  if (config_.mode == GeocodeMode::Fixture) {
    if (!std::filesystem::exists(config_.fixture_path)) {
      throw GeocodeError(GeocodeError::Kind::Config,
                         "geocode fixture file not found: " + config_.fixture_path.string());
    }
    fixtures_ = read_kv_file(config_.fixture_path);
  }
  if (!config_.cache_path.empty()) cache_ = read_kv_file(config_.cache_path);
}

std::string ReverseGeocoder::reverse(const GeoFix& fix) {
  if (!(fix.lat >= -90.0 && fix.lat <= 90.0 && fix.lon >= -180.0 && fix.lon <= 180.0)) {
    throw GeocodeError(GeocodeError::Kind::InvalidFix, "coordinates out of range");
  }
  const std::string key = cache_key(fix.lat, fix.lon);
  {
    std::shared_lock lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++cache_hits_;
      return it->second;
    }
  }
  std::string address;
  if (config_.mode == GeocodeMode::Fixture) {
    auto it = fixtures_.find(key);
    if (it == fixtures_.end()) throw GeocodeError(GeocodeError::Kind::FixtureMiss, "no fixture for " + key);
    address = it->second;
  } else {
    address = fetch_online(fix.lat, fix.lon);
  }
  remember(key, address);
  return address;
}

std::string ReverseGeocoder::fetch_online(double lat, double lon) {
  HttpRequest req;
  req.url = replace_all(replace_all(config_.url_template, "{lat}", coord(lat)), "{lon}", coord(lon));
  req.timeout = config_.timeout;
  req.headers.emplace_back("User-Agent", config_.user_agent);
  req.headers.emplace_back("Accept", "application/json");

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) clock_.sleep_for(config_.backoff * (1 << (attempt - 1)));
    limiter_.acquire();
    ++network_calls_;
    const HttpResponse resp = transport_(req);
    if (resp.ok()) {
      const auto body = nlohmann::json::parse(resp.body, nullptr, false);
      if (body.is_discarded()) throw GeocodeError(GeocodeError::Kind::BadResponse, "response is not JSON");
      auto value = detail::string_at_path(body, config_.response_field_path);
      if (!value || value->empty()) {
        throw GeocodeError(GeocodeError::Kind::BadResponse,
                           "response has no string at '" + config_.response_field_path + "'");
      }
      return *value;
    }
    last_error = resp.transport_failure() ? resp.error : "HTTP " + std::to_string(resp.status);
    const bool retryable = resp.transport_failure() || resp.status == 429 || resp.status >= 500;
    if (!retryable) break;
  }
  throw GeocodeError(GeocodeError::Kind::Network, "reverse geocoding failed: " + last_error);
}

void ReverseGeocoder::remember(const std::string& key, const std::string& address) {
  std::unique_lock lock(cache_mu_);
  if (!cache_.emplace(key, address).second) return;
  if (config_.cache_path.empty()) return;
  std::ofstream out(config_.cache_path, std::ios::app);
  out << key << '\t' << address << '\n';
}

std::string reverse(const GeoFix& fix, const GeocodeConfig& config) {
  ReverseGeocoder geocoder(config);
  return geocoder.reverse(fix);
}

}  // namespace scenefuse
