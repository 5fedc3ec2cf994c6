#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jitwin/mask.hpp"

namespace jitwin {

using TrackId = int;
using ObjectSet = std::set<TrackId>;

/// Visual features.
struct VisualAttrs {
  std::vector<double> embedding;
};

/// Spatial properties; `depth` is null when no depth provider is active.
struct SpatialAttrs {
  Point centroid;
  Bbox bbox;
  std::optional<double> depth;
  long long area = 0;
};

/// Motion state. `velocity` is the last-step centroid delta and stays zero
/// until the track has been seen on two frames.
struct TemporalAttrs {
  Point velocity;
  int age = 1;
  int last_seen = 0;
  std::vector<std::pair<int, Point>> history;  // (frame, centroid), window-bounded

  int first_seen() const { return last_seen - age + 1; }
};

struct ObjectNode {
  TrackId track_id = 0;
  int det_id = 0;
  std::string category;
  VisualAttrs h_vis;
  SpatialAttrs h_spa;
  TemporalAttrs h_temp;
  RleMask mask;
};

enum class RelationLabel {
  kBehind,
  kInFrontOf,
  kAbove,
  kBelow,
  kLeftOf,
  kRightOf,
  kNear,
  kOverlaps,
  kMovingToward,
  kMovingAway,
};

inline constexpr RelationLabel kAllRelationLabels[] = {
    RelationLabel::kBehind, RelationLabel::kInFrontOf, RelationLabel::kAbove,        RelationLabel::kBelow,
    RelationLabel::kLeftOf, RelationLabel::kRightOf,   RelationLabel::kNear,         RelationLabel::kOverlaps,
    RelationLabel::kMovingToward, RelationLabel::kMovingAway,
};

inline std::string_view label_name(RelationLabel l) {
  switch (l) {
    case RelationLabel::kBehind: return "behind";
    case RelationLabel::kInFrontOf: return "in_front_of";
    case RelationLabel::kAbove: return "above";
    case RelationLabel::kBelow: return "below";
    case RelationLabel::kLeftOf: return "left_of";
    case RelationLabel::kRightOf: return "right_of";
    case RelationLabel::kNear: return "near";
    case RelationLabel::kOverlaps: return "overlaps";
    case RelationLabel::kMovingToward: return "moving_toward";
    case RelationLabel::kMovingAway: return "moving_away";
  }
  return "unknown";
}

inline bool needs_depth(RelationLabel l) {
  return l == RelationLabel::kBehind || l == RelationLabel::kInFrontOf;
}

inline std::set<RelationLabel> all_relation_labels() {
  return {std::begin(kAllRelationLabels), std::end(kAllRelationLabels)};
}

struct RelationEdge {
  TrackId src = 0;
  TrackId dst = 0;
  RelationLabel label = RelationLabel::kNear;
  double strength = 1.0;

  bool operator==(const RelationEdge&) const = default;
};

/// One frame of the twin. Nodes are keyed by track id (or by det_id while
/// the graph is still provisional).
struct SceneGraph {
  int frame_index = 0;
  int width = 1;
  int height = 1;
  std::map<TrackId, ObjectNode> nodes;
  std::vector<RelationEdge> edges;

  const ObjectNode* find(TrackId id) const {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
  }
  ObjectSet ids() const {
    ObjectSet out;
    for (const auto& [id, _] : nodes) out.insert(id);
    return out;
  }
};

}  // namespace jitwin
