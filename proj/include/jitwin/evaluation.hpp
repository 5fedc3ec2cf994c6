#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/image_io.hpp"
#include "jitwin/mask.hpp"

namespace jitwin {

// ---- per-frame metrics ----------------------------------------------------

/// Foreground pixels with a 4-neighbour in the background or off the frame.
inline BinaryMask boundary(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  const int w = m.width();
  const int h = m.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.at(x - 1, y) || !m.at(x + 1, y) ||
                        !m.at(x, y - 1) || !m.at(x, y + 1);
      if (edge) out.set(x, y);
    }
  return out;
}

/// Matching tolerance: ceil(0.008 * frame diagonal).
inline int boundary_radius(int width, int height) {
  return static_cast<int>(std::ceil(0.008 * std::hypot(static_cast<double>(width), static_cast<double>(height))));
}

namespace detail {

inline std::vector<std::pair<int, int>> disc_offsets(int r) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) out.emplace_back(dx, dy);
  return out;
}

// Number of set pixels in `from` that have a set pixel of `to` within the disc.
inline std::size_t matched(const BinaryMask& from, const BinaryMask& to,
                           const std::vector<std::pair<int, int>>& disc) {
  std::size_t n = 0;
  const int w = from.width();
  const int h = from.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!from.at(x, y)) continue;
      for (auto [dx, dy] : disc) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx >= 0 && yy >= 0 && xx < w && yy < h && to.at(xx, yy)) {
          ++n;
          break;
        }
      }
    }
  return n;
}

}  // namespace detail

/// Boundary F-measure for one frame. `radius` defaults to boundary_radius.
inline double frame_contour_f(const BinaryMask& pred, const BinaryMask& gt, std::optional<int> radius = std::nullopt) {
  require_same_shape(pred, gt);
  const BinaryMask bp = boundary(pred);
  const BinaryMask bg = boundary(gt);
  const std::size_t np = bp.count();
  const std::size_t ng = bg.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const auto disc = detail::disc_offsets(radius.value_or(boundary_radius(pred.width(), pred.height())));
  const double precision = static_cast<double>(detail::matched(bp, bg, disc)) / static_cast<double>(np);
  const double recall = static_cast<double>(detail::matched(bg, bp, disc)) / static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(a) + " predicted frames vs " + std::to_string(b) + " ground-truth frames");
  }
  if (a == 0) throw Error(ErrorCode::kLengthMismatch, "no annotated frames");
}

}  // namespace detail

/// J: mean per-frame IoU. Frames where both masks are empty score 1.
inline double region_similarity(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt) {
  detail::require_same_length(pred.size(), gt.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += mask_iou(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

/// F: mean per-frame boundary F-measure.
inline double contour_accuracy(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt,
                               std::optional<int> radius = std::nullopt) {
  detail::require_same_length(pred.size(), gt.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += frame_contour_f(pred[i], gt[i], radius);
  return sum / static_cast<double>(pred.size());
}

// ---- dataset manifest -----------------------------------------------------

enum class Category { kSemantic, kSpatial, kTemporal };

inline constexpr std::array<Category, 3> kCategories = {Category::kSemantic, Category::kSpatial, Category::kTemporal};

inline std::string category_name(Category c) {
  switch (c) {
    case Category::kSemantic: return "semantic";
    case Category::kSpatial: return "spatial";
    case Category::kTemporal: return "temporal";
  }
  return "unknown";
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kCategories)
    if (category_name(c) == s) return c;
  return std::nullopt;
}

struct Sample {
  std::string id;
  std::string video;  // frame directory, relative to the manifest
  int frame_count = 0;
  std::string query;
  Category category = Category::kSemantic;
  int level = 1;
  std::string gt;  // mask directory, relative to the manifest
};

struct Manifest {
  std::filesystem::path root;  // directory holding dataset.json
  std::vector<Sample> samples;
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"id", s.id},
                       {"video", s.video},
                       {"frame_count", s.frame_count},
                       {"query", s.query},
                       {"category", category_name(s.category)},
                       {"level", s.level},
                       {"gt", s.gt}});
  }
  return {{"samples", std::move(samples)}};
}

inline Manifest parse_manifest(const nlohmann::json& j, std::filesystem::path root) {
  Manifest m{std::move(root), {}};
  auto fail = [](std::size_t i, const std::string& why) {
    throw Error(ErrorCode::kSchemaError, "samples[" + std::to_string(i) + "]: " + why);
  };
  if (!j.is_object() || !j.contains("samples") || !j["samples"].is_array()) {
    throw Error(ErrorCode::kSchemaError, "manifest needs a \"samples\" array");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j["samples"].size(); ++i) {
    const auto& s = j["samples"][i];
    Sample out;
    try {
      out.id = s.at("id").get<std::string>();
      out.video = s.value("video", std::string());
      out.frame_count = s.at("frame_count").get<int>();
      out.query = s.at("query").get<std::string>();
      const auto cat = s.at("category").get<std::string>();
      auto c = parse_category(cat);
      if (!c) fail(i, "category \"" + cat + "\" is not semantic, spatial or temporal");
      out.category = *c;
      out.level = s.at("level").get<int>();
      out.gt = s.at("gt").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(i, e.what());
    }
    if (out.level < 1 || out.level > 3) fail(i, "level must be 1, 2 or 3");
    if (out.frame_count < 0) fail(i, "frame_count must be >= 0");
    if (!seen.insert(out.id).second) fail(i, "duplicate id \"" + out.id + "\"");
    m.samples.push_back(std::move(out));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_json_file(path), path.parent_path());
}

inline std::string frame_file_stem(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%04d", frame);
  return buf;
}

/// GT masks for the annotated frames of a sample, keyed by frame index.
/// A frame is annotated when masks/<id>/fNNNN.json or .png exists.
inline std::map<int, BinaryMask> load_ground_truth(const Manifest& m, const Sample& s) {
  std::map<int, BinaryMask> out;
  const auto dir = m.root / s.gt;
  for (int f = 0; f < s.frame_count; ++f) {
    for (const char* ext : {".json", ".png"}) {
      auto p = dir / (frame_file_stem(f) + ext);
      if (std::filesystem::exists(p)) {
        out.emplace(f, read_mask_file(p));
        break;
      }
    }
  }
  return out;
}

// ---- predictions index ----------------------------------------------------

/// predictions.json: {"queries": {"<query id>": ["q0000_f0000.json", ...]}}
struct PredictionIndex {
  std::map<std::string, std::vector<std::string>> queries;

  /// Stable file prefix for a query id: its position in first-seen order.
  std::vector<std::string> order;

  std::string prefix_for(const std::string& id) {
    auto it = std::find(order.begin(), order.end(), id);
    std::size_t k = static_cast<std::size_t>(it - order.begin());
    if (it == order.end()) order.push_back(id);
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%04zu", k);
    return buf;
  }
};

inline nlohmann::json index_to_json(const PredictionIndex& idx) {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& id : idx.order) q[id] = idx.queries.count(id) ? idx.queries.at(id) : std::vector<std::string>{};
  return {{"queries", std::move(q)}, {"order", idx.order}};
}

inline PredictionIndex index_from_json(const nlohmann::json& j) {
  PredictionIndex idx;
  try {
    if (j.contains("order")) idx.order = j.at("order").get<std::vector<std::string>>();
    for (const auto& [id, files] : j.at("queries").items()) {
      idx.queries[id] = files.get<std::vector<std::string>>();
      if (std::find(idx.order.begin(), idx.order.end(), id) == idx.order.end()) idx.order.push_back(id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("predictions index: ") + e.what());
  }
  return idx;
}

inline PredictionIndex load_prediction_index(const std::filesystem::path& dir) {
  const auto p = dir / "predictions.json";
  if (!std::filesystem::exists(p)) return {};
  return index_from_json(read_json_file(p));
}

/// Frame index encoded in a prediction file name ("..._f0012.json" -> 12).
inline std::optional<int> frame_of_file(const std::string& name) {
  static const std::regex kFrame(R"(_f([0-9]+)\.(json|png)$)");
  std::smatch m;
  if (!std::regex_search(name, m, kFrame)) return std::nullopt;
  return std::stoi(m[1].str());
}

// ---- reports --------------------------------------------------------------

struct SampleScore {
  std::string id;
  Category category = Category::kSemantic;
  int level = 1;
  double j = 0.0;
  double f = 0.0;
  int frames = 0;
};

struct CellStats {
  double j = 0.0;
  double f = 0.0;
  int count = 0;
};

struct MetricReport {
  std::vector<SampleScore> samples;
  std::map<std::pair<Category, int>, CellStats> cells;  // absent key = no samples

  std::optional<CellStats> cell(Category c, int level) const {
    auto it = cells.find({c, level});
    if (it == cells.end()) return std::nullopt;
    return it->second;
  }
};

/// Unweighted mean over samples in each (category, level) cell.
inline MetricReport aggregate(std::vector<SampleScore> scores) {
  MetricReport r;
  std::map<std::pair<Category, int>, std::pair<double, double>> sums;
  for (const auto& s : scores) {
    auto& c = r.cells[{s.category, s.level}];
    ++c.count;
    auto& [sj, sf] = sums[{s.category, s.level}];
    sj += s.j;
    sf += s.f;
  }
  for (auto& [key, c] : r.cells) {
    c.j = sums[key].first / c.count;
    c.f = sums[key].second / c.count;
  }
  r.samples = std::move(scores);
  return r;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"id", s.id},
                       {"category", category_name(s.category)},
                       {"level", s.level},
                       {"J", s.j},
                       {"F", s.f},
                       {"frames", s.frames}});
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, c] : r.cells) {
    cells.push_back(
        {{"category", category_name(key.first)}, {"level", key.second}, {"J", c.j}, {"F", c.f}, {"count", c.count}});
  }
  return {{"samples", std::move(samples)}, {"cells", std::move(cells)}};
}

/// Plain-text table: rows J and F, columns semantic/spatial/temporal by L1-L3.
/// Cells without samples print "-".
inline std::string render_table(const MetricReport& r) {
  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
  };
  constexpr std::size_t kCol = 7;
  std::string head1 = "      ";
  std::string head2 = "      ";
  for (Category c : kCategories) {
    std::string name = category_name(c);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    std::string group = " | " + name;
    group.resize(3 * kCol + 3, ' ');
    head1 += group;
    head2 += " | ";
    for (int l = 1; l <= 3; ++l) head2 += pad("L" + std::to_string(l), kCol);
  }
  std::string out = head1 + "\n" + head2 + "\n";
  for (int metric = 0; metric < 2; ++metric) {
    std::string row = metric == 0 ? "J     " : "F     ";
    for (Category c : kCategories) {
      row += " | ";
      for (int l = 1; l <= 3; ++l) {
        auto cell = r.cell(c, l);
        char buf[32] = "-";
        if (cell) std::snprintf(buf, sizeof buf, "%.3f", metric == 0 ? cell->j : cell->f);
        row += pad(buf, kCol);
      }
    }
    out += row + "\n";
  }
  return out;
}

/// Scores one sample. Annotated frames with no prediction file count as empty
/// predictions.
inline SampleScore evaluate_sample(const Manifest& m, const Sample& s, const std::filesystem::path& pred_dir,
                                   const PredictionIndex& idx, std::optional<int> radius = std::nullopt) {
  auto gt = load_ground_truth(m, s);
  std::map<int, std::string> pred_files;
  if (auto it = idx.queries.find(s.id); it != idx.queries.end()) {
    for (const auto& name : it->second)
      if (auto f = frame_of_file(name)) pred_files[*f] = name;
  }
  std::vector<BinaryMask> pred;
  std::vector<BinaryMask> truth;
  for (auto& [f, g] : gt) {
    if (auto it = pred_files.find(f); it != pred_files.end()) {
      pred.push_back(read_mask_file(pred_dir / it->second));
    } else {
      pred.emplace_back(g.width(), g.height());
    }
    truth.push_back(std::move(g));
  }
  SampleScore score{s.id, s.category, s.level, 0.0, 0.0, static_cast<int>(truth.size())};
  score.j = region_similarity(pred, truth);
  score.f = contour_accuracy(pred, truth, radius);
  return score;
}

/// Evaluates every sample of the manifest, one task per sample.
inline MetricReport evaluate_dataset(const Manifest& m, const std::filesystem::path& pred_dir,
                                     std::optional<int> radius = std::nullopt) {
  const PredictionIndex idx = load_prediction_index(pred_dir);
  std::vector<std::future<SampleScore>> tasks;
  for (const auto& s : m.samples) {
    tasks.push_back(std::async(std::launch::async, [&m, &s, &pred_dir, &idx, radius] {
      return evaluate_sample(m, s, pred_dir, idx, radius);
    }));
  }
  std::vector<SampleScore> scores;
  for (auto& t : tasks) scores.push_back(t.get());
  return aggregate(std::move(scores));
}

}  // namespace jitwin
