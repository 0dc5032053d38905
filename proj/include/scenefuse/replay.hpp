#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/ingest.hpp"

namespace scenefuse {

// Replay without sleeping, preserving order.
inline constexpr double kAsFastAsPossible = std::numeric_limits<double>::infinity();

// Called on the replay thread only.
using RecordSink = std::function<void(const SceneRecord&)>;

struct ReplayEntry {
  std::size_t index = 0;
  std::string scenario_id;
  // Offsets from replay start.
  double scheduled_ms = 0.0;
  double actual_ms = 0.0;
};

struct ReplayReport {
  std::vector<ReplayEntry> entries;
  bool completed = false;
  std::string error;

  double max_lateness_ms() const noexcept;
};

// Emits records in order, sleeping so that consecutive emits are separated by
// (timestamp delta) / speed_factor. A throwing sink stops the replay; the
// report then holds the entries delivered so far and the error text.
ReplayReport replay(const RecordStream& stream, double speed_factor, const RecordSink& sink);

class NetworkError : public Error {
 public:
  using Error::Error;
};

// Writes one line per record to a TCP peer.
class TcpLineEmitter {
 public:
  // target is "host:port"; throws NetworkError on a bad target or refused connection.
  explicit TcpLineEmitter(const std::string& target);
  ~TcpLineEmitter();
  TcpLineEmitter(const TcpLineEmitter&) = delete;
  TcpLineEmitter& operator=(const TcpLineEmitter&) = delete;
  TcpLineEmitter(TcpLineEmitter&& other) noexcept;
  TcpLineEmitter& operator=(TcpLineEmitter&& other) noexcept;

  void send_line(const std::string& line);
  RecordSink sink();

 private:
  int fd_ = -1;
};

}  // namespace scenefuse
