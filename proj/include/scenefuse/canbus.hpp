#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class CanDecodeError : public Error {
 public:
  using Error::Error;
};

class CanRangeError : public Error {
 public:
  using Error::Error;
};

class IncompleteTelemetryError : public Error {
 public:
  explicit IncompleteTelemetryError(std::vector<std::string> missing);

  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

enum class ByteOrder { LittleEndian, BigEndian };

// Bit addressing:
//  - LittleEndian (Intel): LSB0 numbering, bit n is bit (n % 8) of byte n / 8;
//    start_bit names the signal's least significant bit.
//  - BigEndian (Motorola): MSB0 numbering, bit n is bit 7 - (n % 8) of byte
//    n / 8; start_bit names the signal's most significant bit.
// In both cases the signal spans start_bit .. start_bit + bit_length - 1.
struct SignalSpec {
  std::string name;
  std::uint32_t frame_id = 0;
  int start_bit = 0;
  int bit_length = 8;
  ByteOrder byte_order = ByteOrder::LittleEndian;
  bool is_signed = false;
  double scale = 1.0;
  double offset = 0.0;
  std::string unit;
};

// Throws CanDecodeError when the spec breaks its own invariants.
void check_spec(const SignalSpec& spec);

struct CanFrame {
  std::uint32_t frame_id = 0;
  bool extended = false;
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, 8> data{};
  double timestamp_ms = 0.0;

  std::span<const std::uint8_t> payload() const noexcept { return {data.data(), dlc}; }

  bool operator==(const CanFrame&) const = default;
};

// The signal's bit field, right-aligned and not sign-extended.
std::uint64_t extract_bits(const CanFrame& frame, const SignalSpec& spec);

double decode_signal(const CanFrame& frame, const SignalSpec& spec);

// Writes the quantized value into an existing payload, leaving other bits untouched.
void place_signal(double value, const SignalSpec& spec, std::array<std::uint8_t, 8>& payload);

std::array<std::uint8_t, 8> encode_signal(double value, const SignalSpec& spec);

// Bit field that encode_signal would store (two's complement for signed
// specs); throws CanRangeError when the value does not fit.
std::uint64_t quantize(double value, const SignalSpec& spec);

struct CanLogParse {
  std::vector<CanFrame> frames;
  std::vector<Diagnostic> diagnostics;
};

// Reads candump log lines "(<seconds>) <iface> <ID>#<HEXDATA>". Blank lines
// and lines starting with ';' are ignored. In strict mode the first bad line
// throws ParseError.
CanLogParse parse_can_log(std::istream& in, bool strict = false);

std::string format_candump_line(const CanFrame& frame, std::string_view iface = "can0");

struct SignalMap {
  SignalSpec speed;
  SignalSpec brake;
  SignalSpec steering;
};

// Latest value of each signal by timestamp (later input wins ties).
Telemetry decode_telemetry(std::span<const CanFrame> frames, const SignalMap& signals);

struct TimedTelemetry {
  double timestamp_ms = 0.0;
  Telemetry telemetry;
};

// One sample per frame that updates a mapped signal, starting once all three
// signals have been seen. Frames must be timestamp-sorted.
std::vector<TimedTelemetry> telemetry_series(std::span<const CanFrame> frames,
                                             const SignalMap& signals);

}  // namespace scenefuse
