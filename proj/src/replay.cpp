#include "scenefuse/replay.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>
#include <utility>

namespace scenefuse {

double ReplayReport::max_lateness_ms() const noexcept {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.actual_ms - e.scheduled_ms);
  return worst;
}

ReplayReport replay(const RecordStream& stream, double speed_factor, const RecordSink& sink) {
  if (!(speed_factor > 0.0)) throw Error("replay speed factor must be positive");
  if (stream.records.empty()) throw Error("replay needs a nonempty stream");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const std::int64_t t0 = stream.records.front().timestamp_ms;
  const bool realtime = std::isfinite(speed_factor);

  ReplayReport report;
  for (std::size_t i = 0; i < stream.records.size(); ++i) {
    const SceneRecord& r = stream.records[i];
    const double scheduled = realtime ? static_cast<double>(r.timestamp_ms - t0) / speed_factor : 0.0;
    if (realtime) {
      std::this_thread::sleep_until(start + std::chrono::duration<double, std::milli>(scheduled));
    }
    const double actual = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    try {
      sink(r);
    } catch (const std::exception& e) {
      report.error = "record " + std::to_string(i) + " (" + r.scenario_id + "): " + e.what();
      return report;
    }
    report.entries.push_back({i, r.scenario_id, scheduled, actual});
  }
  report.completed = true;
  return report;
}

TcpLineEmitter::TcpLineEmitter(const std::string& target) {
  const auto colon = target.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == target.size()) {
    throw NetworkError("bad TCP target '" + target + "', expected host:port");
  }
  const std::string host = target.substr(0, colon);
  const std::string port = target.substr(colon + 1);
  if (port.find_first_not_of("0123456789") != std::string::npos) {
    throw NetworkError("bad TCP port in '" + target + "'");
  }

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw NetworkError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw NetworkError("cannot connect to " + target);
}

TcpLineEmitter::~TcpLineEmitter() {
  if (fd_ >= 0) ::close(fd_);
}

TcpLineEmitter::TcpLineEmitter(TcpLineEmitter&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

TcpLineEmitter& TcpLineEmitter::operator=(TcpLineEmitter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void TcpLineEmitter::send_line(const std::string& line) {
  std::string buf = line;
  buf += '\n';
  std::size_t sent = 0;
  while (sent < buf.size()) {
    const ssize_t n = ::send(fd_, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetworkError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

RecordSink TcpLineEmitter::sink() {
  return [this](const SceneRecord& r) { send_line(serialize_record(r)); };
}

}  // namespace scenefuse
