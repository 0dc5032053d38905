#include "scenefuse/canbus.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string_view>

namespace scenefuse {

IncompleteTelemetryError::IncompleteTelemetryError(std::vector<std::string> missing)
    : Error([&] {
        std::string msg = "incomplete telemetry, missing:";
        for (const auto& m : missing) msg += " " + m;
        return msg;
      }()),
      missing_(std::move(missing)) {}

namespace {

std::uint64_t field_mask(int bit_length) {
  return bit_length >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bit_length) - 1;
}

std::uint64_t load_le(const std::array<std::uint8_t, 8>& d) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | d[i];
  return v;
}

std::uint64_t load_be(const std::array<std::uint8_t, 8>& d) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

void store_le(std::uint64_t v, std::array<std::uint8_t, 8>& d) {
  for (int i = 0; i < 8; ++i) d[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void store_be(std::uint64_t v, std::array<std::uint8_t, 8>& d) {
  for (int i = 0; i < 8; ++i) d[i] = static_cast<std::uint8_t>(v >> (8 * (7 - i)));
}

// Position of the field's least significant bit inside the loaded word.
int field_shift(const SignalSpec& s) {
  return s.byte_order == ByteOrder::LittleEndian ? s.start_bit : 64 - s.start_bit - s.bit_length;
}

double bits_to_raw(std::uint64_t bits, const SignalSpec& s) {
  if (!s.is_signed) return static_cast<double>(bits);
  if (s.bit_length < 64 && (bits >> (s.bit_length - 1)) & 1u) bits |= ~field_mask(s.bit_length);
  return static_cast<double>(static_cast<std::int64_t>(bits));
}

}  // namespace

void check_spec(const SignalSpec& s) {
  if (s.bit_length < 1 || s.bit_length > 64) {
    throw CanDecodeError("signal '" + s.name + "': bit_length must be in 1..64");
  }
  if (s.start_bit < 0 || s.start_bit > 63 || s.start_bit + s.bit_length > 64) {
    throw CanDecodeError("signal '" + s.name + "': bits exceed 64-bit payload");
  }
  if (s.scale == 0.0 || !std::isfinite(s.scale) || !std::isfinite(s.offset)) {
    throw CanDecodeError("signal '" + s.name + "': scale must be finite and non-zero");
  }
}

std::uint64_t extract_bits(const CanFrame& frame, const SignalSpec& spec) {
  check_spec(spec);
  if (frame.frame_id != spec.frame_id) {
    throw CanDecodeError("signal '" + spec.name + "': frame id mismatch");
  }
  if (spec.start_bit + spec.bit_length > frame.dlc * 8) {
    throw CanDecodeError("signal '" + spec.name + "': bit range exceeds payload");
  }
  const std::uint64_t word =
      spec.byte_order == ByteOrder::LittleEndian ? load_le(frame.data) : load_be(frame.data);
  return (word >> field_shift(spec)) & field_mask(spec.bit_length);
}

double decode_signal(const CanFrame& frame, const SignalSpec& spec) {
  return bits_to_raw(extract_bits(frame, spec), spec) * spec.scale + spec.offset;
}

std::uint64_t quantize(double value, const SignalSpec& spec) {
  check_spec(spec);
  const long double q = (static_cast<long double>(value) - spec.offset) / spec.scale;
  if (!std::isfinite(q)) throw CanRangeError("signal '" + spec.name + "': value not finite");
  const long double r = std::nearbyintl(q);
  const long double span = std::ldexp(1.0L, spec.bit_length - (spec.is_signed ? 1 : 0));
  const long double lo = spec.is_signed ? -span : 0.0L;
  const long double hi = span - 1.0L;
  if (r < lo || r > hi) {
    throw CanRangeError("signal '" + spec.name + "': value " + std::to_string(value) +
                        " not representable in " + std::to_string(spec.bit_length) + " bits");
  }
  std::uint64_t bits = 0;
  if (spec.is_signed) {
    bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(r));
  } else {
    bits = static_cast<std::uint64_t>(r);
  }
  return bits & field_mask(spec.bit_length);
}

void place_signal(double value, const SignalSpec& spec, std::array<std::uint8_t, 8>& payload) {
  const std::uint64_t bits = quantize(value, spec);
  const int shift = field_shift(spec);
  const std::uint64_t mask = field_mask(spec.bit_length) << shift;
  if (spec.byte_order == ByteOrder::LittleEndian) {
    store_le((load_le(payload) & ~mask) | (bits << shift), payload);
  } else {
    store_be((load_be(payload) & ~mask) | (bits << shift), payload);
  }
}

std::array<std::uint8_t, 8> encode_signal(double value, const SignalSpec& spec) {
  std::array<std::uint8_t, 8> payload{};
  place_signal(value, spec, payload);
  return payload;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (is_space(s.front()) || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (is_space(s.back()) || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

std::string_view next_token(std::string_view& s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  std::size_t n = 0;
  while (n < s.size() && !is_space(s[n])) ++n;
  std::string_view tok = s.substr(0, n);
  s.remove_prefix(n);
  return tok;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

// "(1700000000.123456)" -> milliseconds.
std::optional<double> parse_timestamp(std::string_view tok) {
  if (tok.size() < 3 || tok.front() != '(' || tok.back() != ')') return std::nullopt;
  tok = tok.substr(1, tok.size() - 2);
  const auto dot = tok.find('.');
  const std::string_view whole = tok.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : tok.substr(dot + 1);
  if (!all_digits(whole) || whole.size() > 12) return std::nullopt;
  if (dot != std::string_view::npos && (!all_digits(frac) || frac.size() > 9)) return std::nullopt;
  std::uint64_t sec = 0;
  std::from_chars(whole.data(), whole.data() + whole.size(), sec);
  double ms = static_cast<double>(sec) * 1000.0;
  if (!frac.empty()) {
    std::uint64_t f = 0;
    std::from_chars(frac.data(), frac.data() + frac.size(), f);
    ms += static_cast<double>(f) * 1000.0 / std::pow(10.0, static_cast<double>(frac.size()));
  }
  return ms;
}

struct FrameParse {
  std::optional<CanFrame> frame;
  std::string error;
};

FrameParse parse_frame_token(std::string_view tok) {
  const auto hash = tok.find('#');
  if (hash == std::string_view::npos) return {std::nullopt, "missing '#' separator"};
  const std::string_view id_str = tok.substr(0, hash);
  std::string_view data_str = tok.substr(hash + 1);
  if (!data_str.empty() && data_str.front() == '#') return {std::nullopt, "CAN-FD frames are not supported"};
  if (!data_str.empty() && (data_str.front() == 'R' || data_str.front() == 'r')) {
    return {std::nullopt, "remote frames carry no data"};
  }
  if (id_str.empty() || id_str.size() > 8) return {std::nullopt, "bad frame id"};

  CanFrame f;
  std::uint32_t id = 0;
  for (char c : id_str) {
    const int v = hex_value(c);
    if (v < 0) return {std::nullopt, "bad frame id"};
    id = (id << 4) | static_cast<std::uint32_t>(v);
  }
  f.extended = id_str.size() > 3;
  if ((!f.extended && id > 0x7FF) || id > 0x1FFFFFFF) return {std::nullopt, "frame id out of range"};
  f.frame_id = id;

  if (data_str.size() % 2 != 0 || data_str.size() > 16) return {std::nullopt, "bad payload length"};
  for (std::size_t i = 0; i < data_str.size(); i += 2) {
    const int hi = hex_value(data_str[i]);
    const int lo = hex_value(data_str[i + 1]);
    if (hi < 0 || lo < 0) return {std::nullopt, "bad payload hex"};
    f.data[i / 2] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  f.dlc = static_cast<std::uint8_t>(data_str.size() / 2);
  return {f, {}};
}

}  // namespace

CanLogParse parse_can_log(std::istream& in, bool strict) {
  CanLogParse out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == ';') continue;

    auto fail = [&](std::string message) {
      if (strict) throw ParseError(line_no, message);
      out.diagnostics.push_back({line_no, std::move(message)});
    };

    const auto ts = parse_timestamp(next_token(line));
    if (!ts) {
      fail("bad timestamp");
      continue;
    }
    const std::string_view iface = next_token(line);
    if (iface.empty()) {
      fail("missing interface");
      continue;
    }
    const std::string_view frame_tok = next_token(line);
    if (frame_tok.empty()) {
      fail("missing frame");
      continue;
    }
    if (!next_token(line).empty()) {
      fail("trailing content");
      continue;
    }
    FrameParse fp = parse_frame_token(frame_tok);
    if (!fp.frame) {
      fail(fp.error);
      continue;
    }
    fp.frame->timestamp_ms = *ts;
    out.frames.push_back(*fp.frame);
  }
  return out;
}

std::string format_candump_line(const CanFrame& frame, std::string_view iface) {
  char head[64];
  const auto sec = static_cast<long long>(std::floor(frame.timestamp_ms / 1000.0));
  const auto usec = static_cast<long long>(std::llround((frame.timestamp_ms - sec * 1000.0) * 1000.0));
  std::snprintf(head, sizeof head, "(%lld.%06lld) ", sec, usec);
  char id[16];
  std::snprintf(id, sizeof id, frame.extended ? "%08X#" : "%03X#", frame.frame_id);
  std::string line = head;
  line += iface;
  line += ' ';
  line += id;
  static constexpr char kHex[] = "0123456789ABCDEF";
  for (std::uint8_t b : frame.payload()) {
    line += kHex[b >> 4];
    line += kHex[b & 0xF];
  }
  return line;
}

namespace {

std::optional<double> latest_value(std::span<const CanFrame> frames, const SignalSpec& spec) {
  const CanFrame* best = nullptr;
  for (const CanFrame& f : frames) {
    if (f.frame_id != spec.frame_id) continue;
    if (!best || f.timestamp_ms >= best->timestamp_ms) best = &f;
  }
  if (!best) return std::nullopt;
  return decode_signal(*best, spec);
}

}  // namespace

Telemetry decode_telemetry(std::span<const CanFrame> frames, const SignalMap& signals) {
  const auto speed = latest_value(frames, signals.speed);
  const auto brake = latest_value(frames, signals.brake);
  const auto steering = latest_value(frames, signals.steering);
  std::vector<std::string> missing;
  if (!speed) missing.push_back(signals.speed.name.empty() ? "speed" : signals.speed.name);
  if (!brake) missing.push_back(signals.brake.name.empty() ? "brake" : signals.brake.name);
  if (!steering) missing.push_back(signals.steering.name.empty() ? "steering" : signals.steering.name);
  if (!missing.empty()) throw IncompleteTelemetryError(std::move(missing));
  return Telemetry{*speed, *brake != 0.0, *steering};
}

std::vector<TimedTelemetry> telemetry_series(std::span<const CanFrame> frames,
                                             const SignalMap& signals) {
  std::optional<double> speed, brake, steering;
  std::vector<TimedTelemetry> out;
  double last_ts = -INFINITY;
  for (const CanFrame& f : frames) {
    if (f.timestamp_ms < last_ts) throw Error("CAN frames are not timestamp-sorted");
    last_ts = f.timestamp_ms;
    bool touched = false;
    auto update = [&](const SignalSpec& spec, std::optional<double>& slot) {
      if (f.frame_id != spec.frame_id) return;
      slot = decode_signal(f, spec);
      touched = true;
    };
    update(signals.speed, speed);
    update(signals.brake, brake);
    update(signals.steering, steering);
    if (touched && speed && brake && steering) {
      out.push_back({f.timestamp_ms, Telemetry{*speed, *brake != 0.0, *steering}});
    }
  }
  return out;
}

}  // namespace scenefuse
