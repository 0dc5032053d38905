#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "scenefuse/clock.hpp"
#include "scenefuse/error.hpp"
#include "scenefuse/http.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class GeocodeError : public Error {
 public:
  enum class Kind { InvalidFix, FixtureMiss, Network, BadResponse, Config };

  GeocodeError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class GeocodeMode { Online, Fixture };

struct GeocodeConfig {
  // e.g. "https://geo.example/reverse?lat={lat}&lon={lon}&format=json".
  // No default provider is assumed.
  std::string url_template;
  std::string response_field_path = "display_name";
  double rate_limit_per_s = 1.0;
  std::filesystem::path cache_path;
  // Line-delimited "<lat>,<lon>\t<address>" entries, same layout as the cache.
  std::filesystem::path fixture_path;
  GeocodeMode mode = GeocodeMode::Fixture;
  int max_retries = 2;
  std::chrono::milliseconds backoff{250};
  std::chrono::milliseconds timeout{10000};
  std::string user_agent = "scenefuse/0.1";
};

// Throws GeocodeError(Config) when an invariant does not hold.
void check_config(const GeocodeConfig& config);

// Coordinates rounded to 5 decimals, "lat,lon".
std::string cache_key(double lat, double lon);

// Sliding-window limiter: at most max(1, floor(rate)) acquisitions per
// max(1, floor(rate)) / rate seconds.
class RateLimiter {
 public:
  RateLimiter(double rate_per_s, Clock& clock);
  void acquire();

 private:
  Clock& clock_;
  std::size_t capacity_;
  std::chrono::nanoseconds window_;
  std::deque<Clock::time_point> recent_;
  std::mutex mu_;
};

class ReverseGeocoder {
 public:
  explicit ReverseGeocoder(GeocodeConfig config, HttpTransport transport = http_send,
                           Clock& clock = system_clock());

  // Cache first, then fixtures or the network depending on mode.
  std::string reverse(const GeoFix& fix);

  std::size_t network_calls() const noexcept { return network_calls_; }
  std::size_t cache_hits() const noexcept { return cache_hits_; }

 private:
  std::string fetch_online(double lat, double lon);
  void remember(const std::string& key, const std::string& address);

  GeocodeConfig config_;
  HttpTransport transport_;
  Clock& clock_;
  RateLimiter limiter_;
  std::map<std::string, std::string> fixtures_;
  std::map<std::string, std::string> cache_;
  mutable std::shared_mutex cache_mu_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

std::string reverse(const GeoFix& fix, const GeocodeConfig& config);

}  // namespace scenefuse
