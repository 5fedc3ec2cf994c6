#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/chat.hpp"
#include "jitwin/dsl.hpp"
#include "jitwin/error.hpp"
#include "jitwin/predicates.hpp"
#include "jitwin/text.hpp"
#include "jitwin/twin.hpp"

namespace jitwin {

/// Textual rendering of a scene graph: a header line, one line per node and
/// one line per edge, ordered by track id.
inline std::string format_scene(const SceneGraph& g) {
  std::string out = "scene at frame " + std::to_string(g.frame_index) + ": " + std::to_string(g.nodes.size()) +
                    " object" + (g.nodes.size() == 1 ? "" : "s") + "\n";
  for (const auto& [id, n] : g.nodes) {
    out += "object " + std::to_string(id) + ": " + n.category + " at (" + format_number(n.h_spa.centroid.x) + ", " +
           format_number(n.h_spa.centroid.y) + "), depth " +
           (n.h_spa.depth ? format_number(*n.h_spa.depth) : std::string("unknown")) + ", velocity (" +
           format_number(n.h_temp.velocity.x) + ", " + format_number(n.h_temp.velocity.y) + ")\n";
  }
  auto edges = g.edges;
  std::sort(edges.begin(), edges.end(), [](const RelationEdge& a, const RelationEdge& b) {
    return std::tie(a.src, a.dst, a.label) < std::tie(b.src, b.dst, b.label);
  });
  for (const auto& e : edges) {
    std::string label(label_name(e.label));
    std::replace(label.begin(), label.end(), '_', ' ');
    out += "object " + std::to_string(e.src) + " is " + label + " object " + std::to_string(e.dst) + "\n";
  }
  return out;
}

class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;
  virtual ObjectSet select(const std::string& description, const SceneGraph& g) = 0;
};

/// Offline fallback: a node matches when its category's tokens appear as a
/// contiguous run in the description (case-insensitive, no stemming).
class KeywordSemantics : public SemanticProvider {
 public:
  ObjectSet select(const std::string& description, const SceneGraph& g) override {
    const auto words = tokenize_words(description);
    ObjectSet out;
    for (const auto& [id, n] : g.nodes) {
      const auto cat = tokenize_words(n.category);
      if (cat.empty() || cat.size() > words.size()) continue;
      for (std::size_t s = 0; s + cat.size() <= words.size(); ++s) {
        if (std::equal(cat.begin(), cat.end(), words.begin() + static_cast<std::ptrdiff_t>(s))) {
          out.insert(id);
          break;
        }
      }
    }
    return out;
  }
};

/// Parses the first JSON integer array in a model reply.
inline std::vector<long long> parse_id_list(const std::string& reply) {
  auto open = reply.find('[');
  auto close = reply.find(']', open == std::string::npos ? 0 : open);
  if (open == std::string::npos || close == std::string::npos) {
    throw Error(ErrorCode::kSemanticProviderError, "reply contains no id list: " + reply);
  }
  try {
    auto j = nlohmann::json::parse(reply.substr(open, close - open + 1));
    std::vector<long long> ids;
    for (const auto& v : j) ids.push_back(v.get<long long>());
    return ids;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSemanticProviderError, std::string("bad id list: ") + e.what());
  }
}

/// Asks a chat endpoint which objects of the formatted scene match.
class ChatSemantics : public SemanticProvider {
 public:
  explicit ChatSemantics(ChatEndpoint endpoint) : client_(std::move(endpoint)) {}

  ObjectSet select(const std::string& description, const SceneGraph& g) override {
    std::string reply;
    try {
      reply = client_.complete(
          {{"system",
            "You identify objects in a scene description. Reply with a JSON array of the integer object ids "
            "that match the request and nothing else. Reply [] when nothing matches."},
           {"user", format_scene(g) + "\nRequest: " + description}});
    } catch (const Error& e) {
      throw Error(ErrorCode::kSemanticProviderError, e.what());
    }
    ObjectSet out;
    for (long long id : parse_id_list(reply))
      if (g.find(static_cast<TrackId>(id))) out.insert(static_cast<TrackId>(id));
    return out;
  }

 private:
  ChatClient client_;
};

/// Runs the provider and drops any id the graph does not contain.
inline ObjectSet semantic_select(const std::string& description, const SceneGraph& g, SemanticProvider& provider) {
  ObjectSet out;
  for (TrackId id : provider.select(description, g))
    if (g.find(id)) out.insert(id);
  return out;
}

struct EvalOptions {
  double theta_move = 2.0;  // px of centroid displacement that counts as motion
  PredicateParams predicates;
};

/// Read-only view used while evaluating one frame. `inputs` holds results of
/// already-evaluated plan nodes at the base range; `programs` lets an input be
/// re-evaluated when a temporal operator narrows the frame range.
struct EvalContext {
  const TwinState& twin;
  SemanticProvider& semantics;
  EvalOptions options{};
  const std::map<std::string, dsl::Expr>* programs = nullptr;
  const std::map<std::string, ObjectSet>* inputs = nullptr;
};

namespace detail {

class Evaluator {
 public:
  explicit Evaluator(const EvalContext& ctx) : ctx_(ctx) {
    if (ctx.twin.empty()) throw Error(ErrorCode::kMissingCapability, "twin window is empty");
    base_lo_ = ctx.twin.window().front().frame_index;
    base_hi_ = ctx.twin.window().back().frame_index;
  }

  ObjectSet eval(const dsl::Expr& e) { return eval(e, base_lo_, base_hi_); }

  ObjectSet eval(const dsl::Expr& e, int lo, int hi) {
    using dsl::Op;
    const SceneGraph& g = graph(hi);
    switch (e.op) {
      case Op::kAll: return g.ids();
      case Op::kCategory: {
        ObjectSet out;
        const auto want = to_lower(e.text);
        for (const auto& [id, n] : g.nodes)
          if (to_lower(n.category) == want) out.insert(id);
        return out;
      }
      case Op::kAttr: return eval_attr(e, g);
      case Op::kSemantic: {
        return semantic_select(e.text, g, ctx_.semantics);
      }
      case Op::kInput: {
        if (lo == base_lo_ && hi == base_hi_ && ctx_.inputs) {
          if (auto it = ctx_.inputs->find(e.text); it != ctx_.inputs->end()) return it->second;
        }
        if (ctx_.programs) {
          if (auto it = ctx_.programs->find(e.text); it != ctx_.programs->end()) return eval(it->second, lo, hi);
        }
        throw Error(ErrorCode::kPlanInvalid, "unresolved input '" + e.text + "'");
      }
      case Op::kBehind:
      case Op::kInFrontOf:
      case Op::kAbove:
      case Op::kBelow:
      case Op::kLeftOf:
      case Op::kRightOf:
      case Op::kNear:
      case Op::kOverlaps: return eval_spatial(e, g, lo, hi);
      case Op::kMoved: return eval_moved(e, lo, hi);
      case Op::kEntered: {
        ObjectSet out;
        for (TrackId id : eval(e.args[0], lo, hi)) {
          const ObjectNode* n = g.find(id);
          if (n && n->h_temp.first_seen() > lo && n->h_temp.first_seen() <= hi) out.insert(id);
        }
        return out;
      }
      case Op::kExited: {
        ObjectSet out;
        for (int k = lo; k < hi; ++k)
          for (TrackId id : eval(e.args[0], lo, k))
            if (!g.find(id)) out.insert(id);
        return out;
      }
      case Op::kMovingToward: {
        const ObjectSet xs = eval(e.args[0], lo, hi);
        const ObjectSet ts = eval(e.args[1], lo, hi);
        ObjectSet out;
        for (TrackId i : xs) {
          const ObjectNode* a = g.find(i);
          if (!a) continue;
          for (TrackId j : ts) {
            const ObjectNode* b = g.find(j);
            if (b && i != j && pred_moving_toward(*a, *b)) {
              out.insert(i);
              break;
            }
          }
        }
        return out;
      }
      case Op::kAfter:
      case Op::kBefore: {
        std::optional<int> fired;
        for (int k = lo; k <= hi && !fired; ++k)
          if (!eval(e.args[0], lo, k).empty()) fired = k;
        if (!fired) return {};
        if (e.op == Op::kAfter) return eval(e.args[1], *fired, hi);
        if (*fired == lo) return {};
        return eval(e.args[1], lo, *fired - 1);
      }
      case Op::kAnd: {
        ObjectSet acc = eval(e.args[0], lo, hi);
        for (std::size_t k = 1; k < e.args.size(); ++k) {
          ObjectSet next = eval(e.args[k], lo, hi);
          ObjectSet keep;
          std::set_intersection(acc.begin(), acc.end(), next.begin(), next.end(), std::inserter(keep, keep.end()));
          acc = std::move(keep);
        }
        return acc;
      }
      case Op::kOr: {
        ObjectSet acc;
        for (const auto& a : e.args) {
          auto s = eval(a, lo, hi);
          acc.insert(s.begin(), s.end());
        }
        return acc;
      }
      case Op::kNot: {
        ObjectSet drop = eval(e.args[0], lo, hi);
        ObjectSet out;
        for (const auto& [id, _] : g.nodes)
          if (!drop.contains(id)) out.insert(id);
        return out;
      }
      case Op::kLargest:
      case Op::kSmallest: return eval_extreme_area(e, g, lo, hi);
      case Op::kClosestTo:
      case Op::kFarthestFrom: return eval_distance_selector(e, g, lo, hi);
    }
    return {};
  }

 private:
  const SceneGraph& graph(int frame) const {
    const SceneGraph* g = ctx_.twin.graph_at(frame);
    if (!g) throw Error(ErrorCode::kMissingCapability, "frame " + std::to_string(frame) + " is outside the window");
    return *g;
  }

  ObjectSet eval_attr(const dsl::Expr& e, const SceneGraph& g) const {
    ObjectSet out;
    const double v = e.number.value_or(0.0);
    for (const auto& [id, n] : g.nodes) {
      double x = 0;
      if (e.text == "area") x = static_cast<double>(n.h_spa.area);
      else if (e.text == "depth") {
        require_depth(n);
        x = *n.h_spa.depth;
      } else if (e.text == "x") x = n.h_spa.centroid.x;
      else if (e.text == "y") x = n.h_spa.centroid.y;
      else if (e.text == "vx") x = n.h_temp.velocity.x;
      else if (e.text == "vy") x = n.h_temp.velocity.y;
      else if (e.text == "speed") x = std::hypot(n.h_temp.velocity.x, n.h_temp.velocity.y);
      else if (e.text == "age") x = n.h_temp.age;
      else if (e.text == "width") x = n.h_spa.bbox.w;
      else if (e.text == "height") x = n.h_spa.bbox.h;
      bool ok = false;
      if (e.cmp == "<") ok = x < v;
      else if (e.cmp == "<=") ok = x <= v;
      else if (e.cmp == ">") ok = x > v;
      else if (e.cmp == ">=") ok = x >= v;
      else if (e.cmp == "=") ok = x == v;
      else if (e.cmp == "!=") ok = x != v;
      if (ok) out.insert(id);
    }
    return out;
  }

  ObjectSet eval_spatial(const dsl::Expr& e, const SceneGraph& g, int lo, int hi) {
    RelationLabel label = RelationLabel::kNear;
    switch (e.op) {
      case dsl::Op::kBehind: label = RelationLabel::kBehind; break;
      case dsl::Op::kInFrontOf: label = RelationLabel::kInFrontOf; break;
      case dsl::Op::kAbove: label = RelationLabel::kAbove; break;
      case dsl::Op::kBelow: label = RelationLabel::kBelow; break;
      case dsl::Op::kLeftOf: label = RelationLabel::kLeftOf; break;
      case dsl::Op::kRightOf: label = RelationLabel::kRightOf; break;
      case dsl::Op::kOverlaps: label = RelationLabel::kOverlaps; break;
      default: break;
    }
    const ObjectSet subjects = eval(e.args[0], lo, hi);
    const ObjectSet refs = eval(e.args[1], lo, hi);
    const double diagonal = frame_diagonal(g.width, g.height);
    ObjectSet out;
    for (TrackId i : subjects) {
      const ObjectNode* a = g.find(i);
      if (!a) continue;
      for (TrackId j : refs) {
        const ObjectNode* b = g.find(j);
        if (!b || i == j) continue;
        if (relation_holds(label, *a, *b, diagonal, ctx_.options.predicates)) {
          out.insert(i);
          break;
        }
      }
    }
    return out;
  }

  ObjectSet eval_moved(const dsl::Expr& e, int lo, int hi) {
    if (e.number) {
      const int span = static_cast<int>(std::ceil(*e.number));
      if (span > ctx_.twin.config().effective_window()) {
        throw Error(ErrorCode::kMissingCapability,
                    "window of " + std::to_string(ctx_.twin.config().effective_window()) +
                        " frames is too short for a span of " + std::to_string(span));
      }
      lo = std::max(lo, hi - span);
    }
    const SceneGraph& g = graph(hi);
    ObjectSet out;
    for (TrackId id : eval(e.args[0], lo, hi)) {
      const ObjectNode* now = g.find(id);
      if (!now) continue;
      for (int k = lo; k <= hi; ++k) {
        if (const ObjectNode* then = graph(k).find(id)) {
          if (centroid_distance(*now, *then) > ctx_.options.theta_move) out.insert(id);
          break;
        }
      }
    }
    return out;
  }

  ObjectSet eval_extreme_area(const dsl::Expr& e, const SceneGraph& g, int lo, int hi) {
    std::optional<TrackId> best;
    long long best_area = 0;
    for (TrackId id : eval(e.args[0], lo, hi)) {
      const ObjectNode* n = g.find(id);
      if (!n) continue;
      const bool better = e.op == dsl::Op::kLargest ? n->h_spa.area > best_area : n->h_spa.area < best_area;
      if (!best || better) {
        best = id;
        best_area = n->h_spa.area;
      }
    }
    return best ? ObjectSet{*best} : ObjectSet{};
  }

  ObjectSet eval_distance_selector(const dsl::Expr& e, const SceneGraph& g, int lo, int hi) {
    const ObjectSet xs = eval(e.args[0], lo, hi);
    const ObjectSet ts = eval(e.args[1], lo, hi);
    std::optional<TrackId> best;
    double best_d = 0;
    for (TrackId i : xs) {
      const ObjectNode* a = g.find(i);
      if (!a) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (TrackId j : ts) {
        const ObjectNode* b = g.find(j);
        if (b && i != j) nearest = std::min(nearest, centroid_distance(*a, *b));
      }
      if (!std::isfinite(nearest)) continue;
      const bool better = e.op == dsl::Op::kClosestTo ? nearest < best_d : nearest > best_d;
      if (!best || better) {
        best = i;
        best_d = nearest;
      }
    }
    return best ? ObjectSet{*best} : ObjectSet{};
  }

  const EvalContext& ctx_;
  int base_lo_ = 0;
  int base_hi_ = 0;
};

}  // namespace detail

/// R_t: the objects at the twin's current frame satisfying the program.
/// Temporal operators may also return ids that are no longer present.
inline ObjectSet eval_program(const dsl::PredicateProgram& p, const EvalContext& ctx) {
  return detail::Evaluator(ctx).eval(p.root);
}

inline ObjectSet eval_expr(const dsl::Expr& e, const EvalContext& ctx) { return detail::Evaluator(ctx).eval(e); }

}  // namespace jitwin
