#pragma once

#include <cmath>
#include <string>

#include "jitwin/error.hpp"
#include "jitwin/scene_graph.hpp"

namespace jitwin {

/// Tunables for the pairwise relations.
struct PredicateParams {
  double dead_zone_px = 2.0;     // above/below/left_of/right_of
  double near_fraction = 0.25;   // of the frame diagonal
};

inline double frame_diagonal(int width, int height) {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

inline double centroid_distance(const ObjectNode& a, const ObjectNode& b) {
  return std::hypot(a.h_spa.centroid.x - b.h_spa.centroid.x, a.h_spa.centroid.y - b.h_spa.centroid.y);
}

inline void require_depth(const ObjectNode& n) {
  if (!n.h_spa.depth) {
    throw Error(ErrorCode::kMissingCapability,
                "depth: object " + std::to_string(n.track_id) + " has no depth estimate");
  }
}

/// i is behind j: strictly farther and the projected boxes intersect.
inline bool pred_behind(const ObjectNode& i, const ObjectNode& j) {
  require_depth(i);
  require_depth(j);
  return *i.h_spa.depth > *j.h_spa.depth && bbox_intersects(i.h_spa.bbox, j.h_spa.bbox);
}

inline bool pred_in_front_of(const ObjectNode& i, const ObjectNode& j) { return pred_behind(j, i); }

// Image y grows downward.
inline bool pred_above(const ObjectNode& i, const ObjectNode& j, const PredicateParams& p = {}) {
  return i.h_spa.centroid.y < j.h_spa.centroid.y - p.dead_zone_px;
}
inline bool pred_below(const ObjectNode& i, const ObjectNode& j, const PredicateParams& p = {}) {
  return pred_above(j, i, p);
}
inline bool pred_left_of(const ObjectNode& i, const ObjectNode& j, const PredicateParams& p = {}) {
  return i.h_spa.centroid.x < j.h_spa.centroid.x - p.dead_zone_px;
}
inline bool pred_right_of(const ObjectNode& i, const ObjectNode& j, const PredicateParams& p = {}) {
  return pred_left_of(j, i, p);
}

inline bool pred_near(const ObjectNode& i, const ObjectNode& j, double diagonal, const PredicateParams& p = {}) {
  return centroid_distance(i, j) < p.near_fraction * diagonal;
}

inline bool pred_overlaps(const ObjectNode& i, const ObjectNode& j) {
  return bbox_intersects(i.h_spa.bbox, j.h_spa.bbox);
}

inline double approach_rate(const ObjectNode& i, const ObjectNode& j) {
  return i.h_temp.velocity.x * (j.h_spa.centroid.x - i.h_spa.centroid.x) +
         i.h_temp.velocity.y * (j.h_spa.centroid.y - i.h_spa.centroid.y);
}

inline bool pred_moving_toward(const ObjectNode& i, const ObjectNode& j) { return approach_rate(i, j) > 0.0; }
inline bool pred_moving_away(const ObjectNode& i, const ObjectNode& j) { return approach_rate(i, j) < 0.0; }

inline bool relation_holds(RelationLabel label, const ObjectNode& i, const ObjectNode& j, double diagonal,
                           const PredicateParams& p = {}) {
  switch (label) {
    case RelationLabel::kBehind: return pred_behind(i, j);
    case RelationLabel::kInFrontOf: return pred_in_front_of(i, j);
    case RelationLabel::kAbove: return pred_above(i, j, p);
    case RelationLabel::kBelow: return pred_below(i, j, p);
    case RelationLabel::kLeftOf: return pred_left_of(i, j, p);
    case RelationLabel::kRightOf: return pred_right_of(i, j, p);
    case RelationLabel::kNear: return pred_near(i, j, diagonal, p);
    case RelationLabel::kOverlaps: return pred_overlaps(i, j);
    case RelationLabel::kMovingToward: return pred_moving_toward(i, j);
    case RelationLabel::kMovingAway: return pred_moving_away(i, j);
  }
  return false;
}

}  // namespace jitwin
