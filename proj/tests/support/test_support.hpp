#pragma once

// Helpers and independent oracles shared by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scenefuse/canbus.hpp"
#include "scenefuse/segstats.hpp"

namespace testsupport {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(SCENEFUSE_FIXTURE_DIR) / rel;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("scenefuse-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// ---- segmentation ----

struct OracleCounts {
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_name;
  std::uint64_t left_area = 0;
  std::uint64_t right_area = 0;
};

// Visits every pixel; a column x is on the left when x + 1 <= W / 2 in exact
// rational terms, i.e. 2x + 2 <= W.
inline OracleCounts brute_force_coverage(const scenefuse::LabelMap& m) {
  OracleCounts o;
  for (const auto& [id, name] : m.class_names) o.by_name[name];
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int id = m.cells[static_cast<std::size_t>(y) * m.width + x];
      auto& slot = o.by_name[m.class_names.at(id)];
      if (2 * x + 2 <= m.width) {
        ++slot.first;
        ++o.left_area;
      } else {
        ++slot.second;
        ++o.right_area;
      }
    }
  }
  return o;
}

inline scenefuse::LabelMap random_label_map(std::mt19937_64& rng, int min_side, int max_side) {
  std::uniform_int_distribution<int> side(min_side, max_side);
  scenefuse::LabelMap m;
  m.width = side(rng);
  m.height = side(rng);
  static const char* kNames[] = {"road", "sidewalk", "person", "building", "vegetation",
                                 "terrain", "car", "sky", "pole", "wall"};
  const int n_ids = std::uniform_int_distribution<int>(1, 12)(rng);
  std::vector<int> ids;
  for (int i = 0; i < n_ids; ++i) {
    int id = std::uniform_int_distribution<int>(0, 255)(rng);
    if (m.class_names.contains(id)) continue;
    // Several ids may share a name.
    m.class_names[id] = kNames[std::uniform_int_distribution<int>(0, 9)(rng)];
    ids.push_back(id);
  }
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  m.cells.resize(static_cast<std::size_t>(m.width) * m.height);
  for (auto& c : m.cells) c = static_cast<std::uint8_t>(ids[pick(rng)]);
  return m;
}

// ---- CAN ----

// Bit-at-a-time reference codec, written from the addressing rules only.
inline int wire_byte(int pos) { return pos / 8; }
inline int wire_bit(int pos, scenefuse::ByteOrder order) {
  return order == scenefuse::ByteOrder::LittleEndian ? pos % 8 : 7 - pos % 8;
}

// Bit k of the signal (k = 0 is least significant) sits at this position.
inline int signal_pos(const scenefuse::SignalSpec& s, int k) {
  return s.byte_order == scenefuse::ByteOrder::LittleEndian ? s.start_bit + k
                                                            : s.start_bit + (s.bit_length - 1 - k);
}

inline std::int64_t oracle_raw(const std::array<std::uint8_t, 8>& data, const scenefuse::SignalSpec& s) {
  std::uint64_t raw = 0;
  for (int k = 0; k < s.bit_length; ++k) {
    const int pos = signal_pos(s, k);
    const bool bit = (data[wire_byte(pos)] >> wire_bit(pos, s.byte_order)) & 1;
    if (bit) raw |= std::uint64_t{1} << k;
  }
  if (s.is_signed && s.bit_length < 64 && (raw >> (s.bit_length - 1)) & 1) {
    return static_cast<std::int64_t>(raw) - (std::int64_t{1} << s.bit_length);
  }
  return static_cast<std::int64_t>(raw);
}

inline double oracle_decode(const std::array<std::uint8_t, 8>& data, const scenefuse::SignalSpec& s) {
  return static_cast<double>(oracle_raw(data, s)) * s.scale + s.offset;
}

inline std::array<std::uint8_t, 8> oracle_place(std::int64_t raw, const scenefuse::SignalSpec& s) {
  std::array<std::uint8_t, 8> data{};
  const auto bits = static_cast<std::uint64_t>(raw);
  for (int k = 0; k < s.bit_length; ++k) {
    if ((bits >> k) & 1) {
      const int pos = signal_pos(s, k);
      data[wire_byte(pos)] |= static_cast<std::uint8_t>(1u << wire_bit(pos, s.byte_order));
    }
  }
  return data;
}

struct SpecCase {
  scenefuse::SignalSpec spec;
  std::int64_t raw = 0;
  double value = 0.0;
};

// A valid spec with at most 50-bit raw magnitudes, plus an in-range value
// whose nearest quantum is `raw`.
inline SpecCase random_spec_case(std::mt19937_64& rng) {
  using scenefuse::ByteOrder;
  SpecCase c;
  auto& s = c.spec;
  s.name = "sig";
  s.frame_id = std::uniform_int_distribution<std::uint32_t>(0, 0x7FF)(rng);
  s.byte_order = rng() & 1 ? ByteOrder::BigEndian : ByteOrder::LittleEndian;
  s.is_signed = rng() & 1;
  s.bit_length = std::uniform_int_distribution<int>(s.is_signed ? 2 : 1, 50)(rng);
  s.start_bit = std::uniform_int_distribution<int>(0, 64 - s.bit_length)(rng);
  static const double kScales[] = {1.0, 0.5, 0.1, 0.01, 0.0625, 0.001, 2.0, 0.25, 1e-4, 3.0};
  s.scale = kScales[std::uniform_int_distribution<int>(0, 9)(rng)];
  s.offset = std::uniform_int_distribution<int>(-1000, 1000)(rng) * 0.5;

  std::int64_t lo = 0;
  std::int64_t hi = 0;
  if (s.is_signed) {
    lo = -(std::int64_t{1} << (s.bit_length - 1));
    hi = (std::int64_t{1} << (s.bit_length - 1)) - 1;
  } else {
    hi = static_cast<std::int64_t>((std::uint64_t{1} << s.bit_length) - 1);
  }
  c.raw = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  double frac = std::uniform_real_distribution<double>(-0.45, 0.45)(rng);
  if ((c.raw == lo && frac < 0) || (c.raw == hi && frac > 0)) frac = -frac;
  if (lo == hi) frac = 0;
  c.value = (static_cast<double>(c.raw) + frac) * s.scale + s.offset;
  return c;
}

}  // namespace testsupport
