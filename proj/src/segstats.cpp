#include "scenefuse/segstats.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace scenefuse {

const ClassCount* CoverageCounts::find(std::string_view class_label) const noexcept {
  for (const auto& c : classes) {
    if (c.class_label == class_label) return &c;
  }
  return nullptr;
}

CoverageCounts count_coverage(const LabelMap& map) {
  if (map.width < 2) throw LabelMapError("degenerate frame: width must be at least 2");
  if (map.height < 1) throw LabelMapError("degenerate frame: height must be at least 1");
  const auto w = static_cast<std::size_t>(map.width);
  const auto h = static_cast<std::size_t>(map.height);
  if (map.cells.size() != w * h) throw LabelMapError("cell count does not match width x height");

  std::array<std::uint64_t, 256> left{};
  std::array<std::uint64_t, 256> right{};
  const std::size_t half = w / 2;
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* row = map.cells.data() + y * w;
    for (std::size_t x = 0; x < half; ++x) ++left[row[x]];
    for (std::size_t x = half; x < w; ++x) ++right[row[x]];
  }

  std::map<std::string, ClassCount> by_name;
  for (const auto& [id, name] : map.class_names) by_name[name].class_label = name;
  for (int id = 0; id < 256; ++id) {
    if (left[id] == 0 && right[id] == 0) continue;
    auto it = map.class_names.find(id);
    if (it == map.class_names.end()) {
      throw LabelMapError("label id " + std::to_string(id) + " has no class name");
    }
    ClassCount& c = by_name[it->second];
    c.left += left[id];
    c.right += right[id];
  }

  CoverageCounts out;
  out.width = map.width;
  out.height = map.height;
  out.left_area = half * h;
  out.right_area = (w - half) * h;
  for (auto& [name, c] : by_name) out.classes.push_back(std::move(c));
  return out;
}

namespace {

int canonical_rank(std::string_view label) {
  static constexpr std::array<std::string_view, 6> kOrder = {
      "road", "sidewalk", "person", "building", "vegetation", "terrain"};
  for (std::size_t i = 0; i < kOrder.size(); ++i) {
    if (kOrder[i] == label) return static_cast<int>(i);
  }
  return static_cast<int>(kOrder.size());
}

void canonical_sort(std::vector<SegClassStat>& stats) {
  std::stable_sort(stats.begin(), stats.end(), [](const SegClassStat& a, const SegClassStat& b) {
    const int ra = canonical_rank(a.class_label);
    const int rb = canonical_rank(b.class_label);
    if (ra != rb) return ra < rb;
    return a.class_label < b.class_label;
  });
}

}  // namespace

SegmentationSummary summary_from_counts(const CoverageCounts& counts, double presence_threshold) {
  SegmentationSummary s;
  const double total = static_cast<double>(counts.left_area + counts.right_area);
  for (const ClassCount& c : counts.classes) {
    if (c.class_label == kRoadClass) {
      s.road_global_fraction = static_cast<double>(c.left + c.right) / total;
      continue;
    }
    s.stats.push_back(make_class_stat(c.class_label,
                                      static_cast<double>(c.left) / static_cast<double>(counts.left_area),
                                      static_cast<double>(c.right) / static_cast<double>(counts.right_area),
                                      presence_threshold));
  }
  canonical_sort(s.stats);
  return s;
}

SegmentationSummary coverage(const LabelMap& map, double presence_threshold) {
  return summary_from_counts(count_coverage(map), presence_threshold);
}

std::vector<SegClassStat> summarize_for_prompt(const SegmentationSummary& summary) {
  std::vector<SegClassStat> rows;
  bool have_sidewalk = false;
  for (const SegClassStat& s : summary.stats) {
    if (s.class_label == kRoadClass) continue;
    if (s.class_label == kSidewalkClass) {
      have_sidewalk = true;
      rows.push_back(s);
    } else if (s.left_fraction > 0.0 || s.right_fraction > 0.0) {
      rows.push_back(s);
    }
  }
  if (!have_sidewalk) rows.push_back(SegClassStat{std::string(kSidewalkClass), 0.0, 0.0, false, false});
  canonical_sort(rows);
  return rows;
}

std::string display_name(std::string_view class_label) {
  if (class_label == "person") return "Pedestrians";
  std::string out(class_label);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::map<int, std::string> parse_class_table(std::istream& in) {
  std::map<int, std::string> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    int id = -1;
    if (!(ls >> id) || id < 0 || id > 255) throw ParseError(line_no, "bad class id");
    std::string name;
    std::getline(ls >> std::ws, name);
    while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
    if (name.empty()) throw ParseError(line_no, "missing class name");
    if (!table.emplace(id, name).second) throw ParseError(line_no, "duplicate class id");
  }
  return table;
}

namespace {

// Next PGM header integer, skipping whitespace and '#' comments.
int read_header_int(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v)) throw LabelMapError("malformed PGM header");
  return v;
}

}  // namespace

LabelMap read_pgm(std::istream& in, std::map<int, std::string> class_names) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') {
    throw LabelMapError("not a binary PGM (P5) file");
  }
  LabelMap map;
  map.width = read_header_int(in);
  map.height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (map.width <= 0 || map.height <= 0 || map.width > 1 << 15 || map.height > 1 << 15 ||
      static_cast<long long>(map.width) * map.height > 1LL << 26) {
    throw LabelMapError("bad PGM dimensions");
  }
  if (maxval <= 0 || maxval > 255) throw LabelMapError("only 8-bit PGM label maps are supported");
  in.get();  // single whitespace before the raster
  map.cells.resize(static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height));
  if (!in.read(reinterpret_cast<char*>(map.cells.data()), static_cast<std::streamsize>(map.cells.size()))) {
    throw LabelMapError("truncated PGM raster");
  }
  map.class_names = std::move(class_names);
  return map;
}

LabelMap load_label_map(const std::filesystem::path& pgm, const std::filesystem::path& class_table) {
  std::ifstream table_in(class_table);
  if (!table_in) throw LabelMapError("cannot open class table " + class_table.string());
  auto names = parse_class_table(table_in);
  std::ifstream pgm_in(pgm, std::ios::binary);
  if (!pgm_in) throw LabelMapError("cannot open label map " + pgm.string());
  return read_pgm(pgm_in, std::move(names));
}

void write_pgm(std::ostream& out, const LabelMap& map) {
  out << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(map.cells.data()), static_cast<std::streamsize>(map.cells.size()));
}

}  // namespace scenefuse
