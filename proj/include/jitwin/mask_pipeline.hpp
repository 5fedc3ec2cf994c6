#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jitwin/error.hpp"
#include "jitwin/mask.hpp"
#include "jitwin/scene_graph.hpp"

namespace jitwin {

/// Union of the masks of the selected nodes. Empty selection gives background.
inline BinaryMask generate_mask(const ObjectSet& selected, const SceneGraph& g) {
  BinaryMask out(g.width, g.height);
  for (TrackId id : selected) {
    const ObjectNode* n = g.find(id);
    if (!n) {
      throw Error(ErrorCode::kUnknownTrackId,
                  "track " + std::to_string(id) + " is not in the graph for frame " + std::to_string(g.frame_index));
    }
    const BinaryMask m = rle_decode(n->mask);
    require_same_shape(out, m);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.set_flat(i);
  }
  return out;
}

struct SmootherState {
  double alpha = 0.8;
  std::optional<SoftMask> prev;
  double binarize_threshold = 0.5;
};

/// One step of the exponential recurrence. The first frame is taken as is.
inline SoftMask smooth(SmootherState& state, const BinaryMask& m) {
  if (!state.prev) {
    state.prev = SoftMask::from_binary(m);
    return *state.prev;
  }
  SoftMask& prev = *state.prev;
  if (prev.width != m.width() || prev.height != m.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "smoother holds " + std::to_string(prev.width) + "x" +
                                                   std::to_string(prev.height) + ", frame is " +
                                                   std::to_string(m.width()) + "x" + std::to_string(m.height()));
  }
  const double a = state.alpha;
  for (std::size_t i = 0; i < prev.values.size(); ++i) {
    prev.values[i] = a * (m[i] ? 1.0 : 0.0) + (1.0 - a) * prev.values[i];
  }
  return prev;
}

inline BinaryMask binarize(const SoftMask& m, double threshold = 0.5) {
  BinaryMask out(m.width, m.height);
  for (std::size_t i = 0; i < m.values.size(); ++i) out.set_flat(i, m.values[i] >= threshold);
  return out;
}

}  // namespace jitwin
