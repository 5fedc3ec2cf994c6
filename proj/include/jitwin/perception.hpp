#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/mask.hpp"

namespace jitwin {

enum class Role { kSegmenter, kDepth, kDetector, kEmbedder };

inline constexpr Role kAllRoles[] = {Role::kSegmenter, Role::kDepth, Role::kDetector, Role::kEmbedder};

inline std::string role_name(Role r) {
  switch (r) {
    case Role::kSegmenter: return "segmenter";
    case Role::kDepth: return "depth";
    case Role::kDetector: return "detector";
    case Role::kEmbedder: return "embedder";
  }
  return "unknown";
}

inline std::optional<Role> parse_role(std::string_view s) {
  // Provider entries may carry a backend suffix, e.g. "depth:depth-anything-v2".
  auto name = s.substr(0, s.find(':'));
  for (Role r : kAllRoles)
    if (role_name(r) == name) return r;
  return std::nullopt;
}

/// Roles available from a trace or live provider bundle. The segmenter is
/// mandatory since every output mask comes from it.
class ProviderSet {
 public:
  ProviderSet() : roles_{Role::kSegmenter} {}
  explicit ProviderSet(std::set<Role> roles) : roles_(std::move(roles)) {
    if (!roles_.contains(Role::kSegmenter)) {
      throw Error(ErrorCode::kSchemaError, "providers: segmenter role is required");
    }
  }
  static ProviderSet all() { return ProviderSet({kAllRoles[0], kAllRoles[1], kAllRoles[2], kAllRoles[3]}); }

  bool has(Role r) const { return roles_.contains(r); }
  const std::set<Role>& roles() const { return roles_; }

 private:
  std::set<Role> roles_;
};

struct Detection {
  int det_id = 0;
  std::string category;
  double score = 1.0;
  Bbox bbox;
  RleMask mask;
  Point centroid;
  std::optional<double> depth_mean;  // larger = farther from camera
  std::vector<double> embedding;
};

struct FrameObservation {
  int frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<Detection> detections;
};

struct TraceHeader {
  int width = 0;
  int height = 0;
  int embedding_dim = 0;
  int frame_count = 0;
  std::vector<std::string> providers;

  ProviderSet provider_set() const {
    std::set<Role> roles;
    for (const auto& p : providers)
      if (auto r = parse_role(p)) roles.insert(*r);
    return ProviderSet(roles);
  }
};

struct PerceptionTrace {
  TraceHeader header;
  std::vector<FrameObservation> frames;
};

namespace detail {

[[noreturn]] inline void schema_fail(std::size_t line, const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": field \"" + field + "\": " + why);
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.is_object() || !j.contains(key)) schema_fail(line, key, "missing");
  return j.at(key);
}

inline int require_int(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_number_integer()) schema_fail(line, key, "expected integer");
  return v.get<int>();
}

inline double require_number(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_number()) schema_fail(line, key, "expected number");
  return v.get<double>();
}

}  // namespace detail

inline TraceHeader parse_trace_header(const nlohmann::json& j, std::size_t line = 1) {
  using namespace detail;
  if (require(j, "type", line) != "header") schema_fail(line, "type", "first record must be the header");
  TraceHeader h;
  h.width = require_int(j, "w", line);
  h.height = require_int(j, "h", line);
  h.embedding_dim = require_int(j, "embedding_dim", line);
  h.frame_count = require_int(j, "frame_count", line);
  if (h.width < 1 || h.height < 1) schema_fail(line, "w", "frame dimensions must be >= 1");
  if (h.embedding_dim < 0) schema_fail(line, "embedding_dim", "must be >= 0");
  if (h.frame_count < 0) schema_fail(line, "frame_count", "must be >= 0");
  const auto& providers = require(j, "providers", line);
  if (!providers.is_array()) schema_fail(line, "providers", "expected array");
  for (const auto& p : providers) {
    if (!p.is_string()) schema_fail(line, "providers", "expected strings");
    h.providers.push_back(p.get<std::string>());
  }
  try {
    (void)h.provider_set();
  } catch (const Error& e) {
    schema_fail(line, "providers", e.what());
  }
  return h;
}

/// Validates a frame record against its header. `line` is used in messages.
inline FrameObservation parse_frame_record(const nlohmann::json& j, const TraceHeader& header,
                                           std::size_t line = 0) {
  using namespace detail;
  if (require(j, "type", line) != "frame") schema_fail(line, "type", "expected \"frame\"");
  FrameObservation obs;
  obs.frame_index = require_int(j, "frame_index", line);
  obs.width = header.width;
  obs.height = header.height;
  if (obs.frame_index < 0) schema_fail(line, "frame_index", "must be >= 0");
  const auto& dets = require(j, "detections", line);
  if (!dets.is_array()) schema_fail(line, "detections", "expected array");
  std::set<int> seen_ids;
  for (const auto& d : dets) {
    Detection det;
    det.det_id = require_int(d, "det_id", line);
    if (!seen_ids.insert(det.det_id).second) schema_fail(line, "det_id", "duplicate within frame");
    const auto& cat = require(d, "category", line);
    if (!cat.is_string()) schema_fail(line, "category", "expected string");
    det.category = cat.get<std::string>();
    det.score = require_number(d, "score", line);
    if (det.score < 0.0 || det.score > 1.0) schema_fail(line, "score", "must lie in [0,1]");

    const auto& bb = require(d, "bbox", line);
    if (!bb.is_array() || bb.size() != 4) schema_fail(line, "bbox", "expected [x,y,w,h]");
    for (const auto& v : bb)
      if (!v.is_number_integer()) schema_fail(line, "bbox", "expected integers");
    det.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    if (det.bbox.w < 0 || det.bbox.h < 0 || det.bbox.x < 0 || det.bbox.y < 0 ||
        det.bbox.x + det.bbox.w > header.width || det.bbox.y + det.bbox.h > header.height) {
      schema_fail(line, "bbox", "box must lie within the frame");
    }

    const auto& mask_json = require(d, "mask", line);
    try {
      det.mask = mask_json.get<RleMask>();
    } catch (const nlohmann::json::exception& e) {
      schema_fail(line, "mask", e.what());
    } catch (const Error& e) {
      schema_fail(line, "mask", e.what());
    }
    if (det.mask.width != header.width || det.mask.height != header.height) {
      schema_fail(line, "mask", "mask dimensions differ from frame");
    }
    std::uint64_t total = 0;
    for (auto c : det.mask.counts) total += c;
    if (total != static_cast<std::uint64_t>(header.width) * header.height) {
      schema_fail(line, "mask", "sum(counts) != w*h");
    }

    const auto& c = require(d, "centroid", line);
    if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
      schema_fail(line, "centroid", "expected [x,y]");
    }
    det.centroid = {c[0].get<double>(), c[1].get<double>()};
    if (det.centroid.x < det.bbox.x || det.centroid.x > det.bbox.x + det.bbox.w ||
        det.centroid.y < det.bbox.y || det.centroid.y > det.bbox.y + det.bbox.h) {
      schema_fail(line, "centroid", "centroid must lie inside bbox");
    }

    const auto& depth = require(d, "depth_mean", line);
    if (!depth.is_null()) {
      if (!depth.is_number()) schema_fail(line, "depth_mean", "expected number or null");
      det.depth_mean = depth.get<double>();
      if (*det.depth_mean < 0.0) schema_fail(line, "depth_mean", "must be >= 0");
    }

    const auto& emb = require(d, "embedding", line);
    if (!emb.is_array()) schema_fail(line, "embedding", "expected array");
    if (static_cast<int>(emb.size()) != header.embedding_dim) {
      schema_fail(line, "embedding",
                  "dimension " + std::to_string(emb.size()) + " != declared " +
                      std::to_string(header.embedding_dim));
    }
    det.embedding.reserve(emb.size());
    for (const auto& v : emb) {
      if (!v.is_number()) schema_fail(line, "embedding", "expected numbers");
      det.embedding.push_back(v.get<double>());
    }
    obs.detections.push_back(std::move(det));
  }
  return obs;
}

inline nlohmann::json header_to_json(const TraceHeader& h) {
  return {{"type", "header"},
          {"w", h.width},
          {"h", h.height},
          {"embedding_dim", h.embedding_dim},
          {"frame_count", h.frame_count},
          {"providers", h.providers}};
}

inline nlohmann::json frame_to_json(const FrameObservation& f) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : f.detections) {
    dets.push_back({{"det_id", d.det_id},
                    {"category", d.category},
                    {"score", d.score},
                    {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                    {"mask", d.mask},
                    {"centroid", {d.centroid.x, d.centroid.y}},
                    {"depth_mean", d.depth_mean ? nlohmann::json(*d.depth_mean) : nlohmann::json(nullptr)},
                    {"embedding", d.embedding}});
  }
  return {{"type", "frame"}, {"frame_index", f.frame_index}, {"detections", std::move(dets)}};
}

/// Source of frames in strict index order; no lookahead.
class ObservationStream {
 public:
  virtual ~ObservationStream() = default;
  virtual const TraceHeader& header() const = 0;
  /// Next frame, or nullopt at end of stream.
  virtual std::optional<FrameObservation> next() = 0;
};

/// Reads a JSONL trace one record at a time.
class TraceReader : public ObservationStream {
 public:
  explicit TraceReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
    if (!in_) throw Error(ErrorCode::kIoError, "cannot open trace " + path_);
    auto first = read_record();
    if (!first) throw Error(ErrorCode::kParseError, path_ + ": line 1: missing header");
    header_ = parse_trace_header(*first, line_);
  }

  const TraceHeader& header() const override { return header_; }

  std::optional<FrameObservation> next() override {
    auto rec = read_record();
    if (!rec) {
      if (frames_read_ != header_.frame_count) {
        detail::schema_fail(line_, "frame_count",
                            "header declares " + std::to_string(header_.frame_count) + " frames, found " +
                                std::to_string(frames_read_));
      }
      return std::nullopt;
    }
    auto obs = parse_frame_record(*rec, header_, line_);
    const int expected_min = last_index_ ? *last_index_ + 1 : 0;
    if ((!last_index_ && obs.frame_index != 0) || (last_index_ && obs.frame_index < expected_min)) {
      detail::schema_fail(line_, "frame_index",
                          "frame indices must increase strictly from 0 (got " + std::to_string(obs.frame_index) +
                              " after " + (last_index_ ? std::to_string(*last_index_) : std::string("start")) +
                              ")");
    }
    last_index_ = obs.frame_index;
    ++frames_read_;
    return obs;
  }

 private:
  std::optional<nlohmann::json> read_record() {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        return nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kParseError, path_ + ": line " + std::to_string(line_) + ": " + e.what());
      }
    }
    return std::nullopt;
  }

  std::ifstream in_;
  std::string path_;
  TraceHeader header_;
  std::size_t line_ = 0;
  std::optional<int> last_index_;
  int frames_read_ = 0;
};

inline PerceptionTrace load_trace(const std::filesystem::path& path) {
  TraceReader reader(path);
  PerceptionTrace trace{reader.header(), {}};
  while (auto f = reader.next()) trace.frames.push_back(std::move(*f));
  return trace;
}

inline void write_trace(const std::filesystem::path& path, const PerceptionTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << header_to_json(trace.header).dump() << "\n";
  for (const auto& f : trace.frames) out << frame_to_json(f).dump() << "\n";
}

/// In-memory trace replay, mostly for tests and generated fixtures.
class VectorStream : public ObservationStream {
 public:
  explicit VectorStream(PerceptionTrace trace) : trace_(std::move(trace)) {}
  const TraceHeader& header() const override { return trace_.header; }
  std::optional<FrameObservation> next() override {
    if (pos_ >= trace_.frames.size()) return std::nullopt;
    return trace_.frames[pos_++];
  }

 private:
  PerceptionTrace trace_;
  std::size_t pos_ = 0;
};

struct LabeledBox {
  std::string category;
  double score = 1.0;
  Bbox bbox;
};

/// Live perception roles. Only the segmenter is mandatory; it signals end of
/// stream by returning nullopt. Dense maps are row-major, the feature map is
/// pixel-major with `embedding_dim` values per pixel.
struct ProviderBundle {
  std::function<std::optional<std::vector<BinaryMask>>(int frame)> segmenter;
  std::function<std::vector<float>(int frame)> depth;
  std::function<std::vector<LabeledBox>(int frame)> detector;
  std::function<std::vector<float>(int frame)> embedder;
};

/// Issues every role's call for a frame concurrently and joins the results
/// into one FrameObservation. Any provider failure surfaces as ProviderError
/// after the last good frame.
class ProviderStream : public ObservationStream {
 public:
  ProviderStream(ProviderBundle providers, int width, int height, int embedding_dim)
      : providers_(std::move(providers)) {
    if (!providers_.segmenter) throw Error(ErrorCode::kSchemaError, "providers: segmenter role is required");
    header_.width = width;
    header_.height = height;
    header_.embedding_dim = providers_.embedder ? embedding_dim : 0;
    header_.providers.push_back("segmenter");
    if (providers_.depth) header_.providers.push_back("depth");
    if (providers_.detector) header_.providers.push_back("detector");
    if (providers_.embedder) header_.providers.push_back("embedder");
  }

  const TraceHeader& header() const override { return header_; }

  std::optional<FrameObservation> next() override {
    if (done_) return std::nullopt;
    const int t = frame_;
    auto segs = std::async(std::launch::async, [&] { return providers_.segmenter(t); });
    std::future<std::vector<float>> depth, features;
    std::future<std::vector<LabeledBox>> boxes;
    if (providers_.depth) depth = std::async(std::launch::async, [&] { return providers_.depth(t); });
    if (providers_.detector) boxes = std::async(std::launch::async, [&] { return providers_.detector(t); });
    if (providers_.embedder) features = std::async(std::launch::async, [&] { return providers_.embedder(t); });

    std::optional<std::vector<BinaryMask>> masks;
    std::vector<float> depth_map, feature_map;
    std::vector<LabeledBox> labels;
    try {
      masks = segs.get();
      if (depth.valid()) depth_map = depth.get();
      if (boxes.valid()) labels = boxes.get();
      if (features.valid()) feature_map = features.get();
    } catch (const std::exception& e) {
      done_ = true;
      // Drain the remaining futures so no task outlives this call.
      for (auto* f : {&depth, &features})
        if (f->valid()) f->wait();
      if (boxes.valid()) boxes.wait();
      throw Error(ErrorCode::kProviderError, "frame " + std::to_string(t) + ": " + e.what());
    }
    if (!masks) {
      done_ = true;
      return std::nullopt;
    }
    ++frame_;
    return join(t, *masks, depth_map, labels, feature_map);
  }

 private:
  FrameObservation join(int t, const std::vector<BinaryMask>& masks, const std::vector<float>& depth_map,
                        const std::vector<LabeledBox>& labels, const std::vector<float>& feature_map) const {
    const std::size_t pixels = static_cast<std::size_t>(header_.width) * header_.height;
    const auto dim = static_cast<std::size_t>(header_.embedding_dim);
    if (providers_.depth && depth_map.size() != pixels) {
      throw Error(ErrorCode::kProviderError, "depth map size mismatch at frame " + std::to_string(t));
    }
    if (providers_.embedder && feature_map.size() != pixels * dim) {
      throw Error(ErrorCode::kProviderError, "feature map size mismatch at frame " + std::to_string(t));
    }
    FrameObservation obs{t, header_.width, header_.height, {}};
    int next_id = 0;
    for (const auto& m : masks) {
      auto box = tight_bbox(m);
      if (!box) continue;
      Detection d;
      d.det_id = next_id++;
      d.bbox = *box;
      d.mask = rle_encode(m);
      d.centroid = *mask_centroid(m);
      d.category = "object";
      double best = 0.0;
      for (const auto& l : labels) {
        const double iou = bbox_iou(l.bbox, *box);
        if (iou > best) {
          best = iou;
          d.category = l.category;
          d.score = l.score;
        }
      }
      double depth_sum = 0.0;
      std::vector<double> emb(dim, 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < pixels; ++i) {
        if (!m[i]) continue;
        ++n;
        if (providers_.depth) depth_sum += depth_map[i];
        for (std::size_t k = 0; k < dim; ++k) emb[k] += feature_map[i * dim + k];
      }
      if (providers_.depth) d.depth_mean = std::max(0.0, depth_sum / static_cast<double>(n));
      double norm = 0.0;
      for (double v : emb) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0)
        for (double& v : emb) v /= norm;
      d.embedding = std::move(emb);
      obs.detections.push_back(std::move(d));
    }
    return obs;
  }

  ProviderBundle providers_;
  TraceHeader header_;
  int frame_ = 0;
  bool done_ = false;
};

}  // namespace jitwin
