#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/perception.hpp"
#include "jitwin/predicates.hpp"
#include "jitwin/scene_graph.hpp"

namespace jitwin {

struct TwinConfig {
  int window = 6;            // w: graphs for frames t-w..t are retained
  double lambda = 0.5;       // weight of spatial proximity in corr
  double tau_match = 0.6;    // minimum corr for a cross-frame match
  bool dt_update = true;     // off: every frame gets fresh track ids
  bool temporal_integration = true;  // off: window forced to 0
  std::set<RelationLabel> relations = all_relation_labels();
  PredicateParams predicates;

  int effective_window() const { return temporal_integration ? window : 0; }
};

/// One node per detection, keyed by det_id. Temporal attributes start fresh.
inline SceneGraph build_frame_graph(const FrameObservation& obs) {
  SceneGraph g;
  g.frame_index = obs.frame_index;
  g.width = obs.width;
  g.height = obs.height;
  for (const auto& d : obs.detections) {
    ObjectNode n;
    n.track_id = d.det_id;
    n.det_id = d.det_id;
    n.category = d.category;
    n.h_vis.embedding = d.embedding;
    n.h_spa.centroid = d.centroid;
    n.h_spa.bbox = d.bbox;
    n.h_spa.depth = d.depth_mean;
    n.h_spa.area = static_cast<long long>(rle_decode(d.mask).count());
    n.h_temp.last_seen = obs.frame_index;
    n.h_temp.history = {{obs.frame_index, d.centroid}};
    n.mask = d.mask;
    g.nodes.emplace(d.det_id, std::move(n));
  }
  return g;
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding sizes " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Cross-frame correspondence score in (0, 1):
///   logistic(cos(h_vis_a, h_vis_b) + lambda * exp(-|c_a - c_b| / diagonal))
inline double corr(const ObjectNode& a, const ObjectNode& b, double lambda, double diagonal) {
  const double sim = cosine_similarity(a.h_vis.embedding, b.h_vis.embedding);
  const double proximity = std::exp(-centroid_distance(a, b) / diagonal);
  return 1.0 / (1.0 + std::exp(-(sim + lambda * proximity)));
}

/// Greedy one-to-one assignment by descending corr. Matched nodes inherit the
/// previous track id; the rest get fresh ids in det_id order. Returns the
/// current graph re-keyed by track id.
inline SceneGraph match_objects(const SceneGraph& prev, const SceneGraph& curr, const TwinConfig& config,
                                TrackId& next_track_id) {
  const double diagonal = frame_diagonal(curr.width, curr.height);
  const int w = config.effective_window();

  struct Candidate {
    double score;
    TrackId prev_id;
    int det_id;
  };
  std::vector<Candidate> candidates;
  if (config.dt_update) {
    for (const auto& [pid, p] : prev.nodes)
      for (const auto& [did, c] : curr.nodes) {
        const double s = corr(p, c, config.lambda, diagonal);
        if (s >= config.tau_match) candidates.push_back({s, pid, did});
      }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(b.score, a.prev_id, a.det_id) < std::tie(a.score, b.prev_id, b.det_id);
    });
  }

  std::set<TrackId> used_prev;
  std::map<int, TrackId> assigned;  // det_id -> inherited track id
  for (const auto& cand : candidates) {
    if (used_prev.contains(cand.prev_id) || assigned.contains(cand.det_id)) continue;
    used_prev.insert(cand.prev_id);
    assigned.emplace(cand.det_id, cand.prev_id);
  }

  SceneGraph out;
  out.frame_index = curr.frame_index;
  out.width = curr.width;
  out.height = curr.height;
  for (const auto& [did, c] : curr.nodes) {
    ObjectNode n = c;
    if (auto it = assigned.find(did); it != assigned.end()) {
      const ObjectNode& p = prev.nodes.at(it->second);
      n.track_id = p.track_id;
      n.h_temp.velocity = {c.h_spa.centroid.x - p.h_spa.centroid.x, c.h_spa.centroid.y - p.h_spa.centroid.y};
      n.h_temp.age = p.h_temp.age + 1;
      n.h_temp.history = p.h_temp.history;
      n.h_temp.history.emplace_back(curr.frame_index, c.h_spa.centroid);
      std::erase_if(n.h_temp.history, [&](const auto& h) { return h.first < curr.frame_index - w; });
    } else {
      n.track_id = next_track_id++;
      n.h_temp.velocity = {};
      n.h_temp.age = 1;
    }
    out.nodes.emplace(n.track_id, std::move(n));
  }
  return out;
}

/// Adds one edge per ordered pair and requested label that holds.
inline SceneGraph compute_relations(SceneGraph g, const std::set<RelationLabel>& labels,
                                    const PredicateParams& params = {}) {
  g.edges.clear();
  for (RelationLabel l : labels) {
    if (!needs_depth(l)) continue;
    for (const auto& [id, n] : g.nodes)
      if (!n.h_spa.depth) {
        throw Error(ErrorCode::kMissingCapability,
                    "depth: relation '" + std::string(label_name(l)) + "' requested but object " +
                        std::to_string(id) + " has no depth");
      }
  }
  const double diagonal = frame_diagonal(g.width, g.height);
  for (const auto& [si, a] : g.nodes)
    for (const auto& [di, b] : g.nodes) {
      if (si == di) continue;
      for (RelationLabel l : labels)
        if (relation_holds(l, a, b, diagonal, params)) g.edges.push_back({si, di, l, 1.0});
    }
  return g;
}

/// Sliding window of scene graphs for one video stream. Single writer.
class TwinState {
 public:
  explicit TwinState(TwinConfig config = {}) : config_(std::move(config)) {}

  const TwinConfig& config() const { return config_; }
  const std::deque<SceneGraph>& window() const { return window_; }
  bool empty() const { return window_.empty(); }
  const SceneGraph& current() const { return window_.back(); }
  TrackId next_track_id() const { return next_track_id_; }
  std::optional<int> last_frame() const { return last_frame_; }

  /// Graph for a frame still inside the window, or nullptr.
  const SceneGraph* graph_at(int frame) const {
    if (window_.empty()) return nullptr;
    const int offset = frame - window_.front().frame_index;
    if (offset < 0 || offset >= static_cast<int>(window_.size())) return nullptr;
    return &window_[static_cast<std::size_t>(offset)];
  }

  void update(const FrameObservation& obs) {
    const int expected = last_frame_ ? *last_frame_ + 1 : 0;
    if (obs.frame_index != expected) {
      throw Error(ErrorCode::kNonContiguousFrame,
                  "expected frame " + std::to_string(expected) + ", got " + std::to_string(obs.frame_index));
    }
    SceneGraph provisional = build_frame_graph(obs);
    static const SceneGraph kNoPrevious{};
    const SceneGraph& prev = window_.empty() ? kNoPrevious : window_.back();
    SceneGraph g = match_objects(prev, provisional, config_, next_track_id_);
    g = compute_relations(std::move(g), config_.relations, config_.predicates);

    window_.push_back(std::move(g));
    last_frame_ = obs.frame_index;
    const int oldest = obs.frame_index - config_.effective_window();
    while (!window_.empty() && window_.front().frame_index < oldest) window_.pop_front();
  }

 private:
  TwinConfig config_;
  std::deque<SceneGraph> window_;
  TrackId next_track_id_ = 0;
  std::optional<int> last_frame_;
};

/// Debug snapshot of one graph: nodes (track_id, category, centroid, z,
/// velocity) and edges (src, dst, label).
inline nlohmann::json snapshot_json(const SceneGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, n] : g.nodes) {
    nodes.push_back({{"track_id", id},
                     {"category", n.category},
                     {"centroid", {n.h_spa.centroid.x, n.h_spa.centroid.y}},
                     {"z", n.h_spa.depth ? nlohmann::json(*n.h_spa.depth) : nlohmann::json(nullptr)},
                     {"velocity", {n.h_temp.velocity.x, n.h_temp.velocity.y}}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"label", label_name(e.label)}});
  return {{"frame_index", g.frame_index}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

/// Hash over every attribute of every graph in the window.
inline std::size_t twin_fingerprint(const TwinState& twin) {
  nlohmann::json all = nlohmann::json::array();
  for (const auto& g : twin.window()) {
    auto snap = snapshot_json(g);
    for (auto& node : snap["nodes"]) {
      const auto& n = g.nodes.at(node["track_id"].get<TrackId>());
      node["embedding"] = n.h_vis.embedding;
      node["bbox"] = {n.h_spa.bbox.x, n.h_spa.bbox.y, n.h_spa.bbox.w, n.h_spa.bbox.h};
      node["area"] = n.h_spa.area;
      node["age"] = n.h_temp.age;
      node["last_seen"] = n.h_temp.last_seen;
      node["mask"] = n.mask;
      nlohmann::json hist = nlohmann::json::array();
      for (const auto& [f, c] : n.h_temp.history) hist.push_back({f, c.x, c.y});
      node["history"] = std::move(hist);
    }
    all.push_back(std::move(snap));
  }
  all.push_back(twin.next_track_id());
  return std::hash<std::string>{}(all.dump());
}

}  // namespace jitwin
