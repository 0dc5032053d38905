#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace scenefuse {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type = "application/json";
  std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
  // 0 when no response was received.
  int status = 0;
  std::string body;
  std::string error;
  bool timed_out = false;

  bool ok() const noexcept { return status >= 200 && status < 300; }
  bool transport_failure() const noexcept { return status == 0; }
};

// Injection point for tests; the default sends the request with cpp-httplib.
using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;

HttpResponse http_send(const HttpRequest& request);

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string target;  // path and query, at least "/"
};

// Throws Error on anything that is not an http(s) URL.
UrlParts split_url(const std::string& url);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace scenefuse
