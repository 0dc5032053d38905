#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "scenefuse/http.hpp"

#include <openssl/evp.h>

#include <httplib.h>

#include "scenefuse/error.hpp"

namespace scenefuse {

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("bad URL '" + url + "'");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme in '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  parts.origin = url.substr(0, path_start);
  parts.target = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (parts.origin.size() <= scheme_end + 3) throw Error("bad URL '" + url + "'");
  return parts;
}

HttpResponse http_send(const HttpRequest& req) {
  HttpResponse out;
  UrlParts parts;
  try {
    parts = split_url(req.url);
  } catch (const Error& e) {
    out.error = e.what();
    return out;
  }

  httplib::Client client(parts.origin);
  const auto ms = req.timeout.count();
  client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);

  httplib::Headers headers;
  for (const auto& [k, v] : req.headers) headers.emplace(k, v);

  const auto start = std::chrono::steady_clock::now();
  httplib::Result res = req.method == "POST"
                            ? client.Post(parts.target, headers, req.body, req.content_type)
                            : client.Get(parts.target, headers);
  if (!res) {
    out.error = httplib::to_string(res.error());
    out.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                    std::chrono::steady_clock::now() - start >= req.timeout;
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace scenefuse
