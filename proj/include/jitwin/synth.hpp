#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/evaluation.hpp"
#include "jitwin/image_io.hpp"
#include "jitwin/mask.hpp"
#include "jitwin/perception.hpp"
#include "jitwin/planner.hpp"

namespace jitwin {

/// One axis-aligned rectangle with linear motion. Sizes should be odd so the
/// mask centroid equals the kinematic centroid.
struct SynthObject {
  std::string id;
  std::string category;
  double cx = 0.0;
  double cy = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  int w = 9;
  int h = 9;
  double depth = 1.0;
  double vz = 0.0;
  int appear = 0;
  std::optional<int> disappear;  // first frame the object is gone
  std::set<int> dropout;         // frames where the detector misses it

  Point centroid_at(int t) const { return {cx + vx * t, cy + vy * t}; }
  double depth_at(int t) const { return depth + vz * t; }
  bool present(int t) const { return t >= appear && (!disappear || t < *disappear); }
  Bbox rect_at(int t) const {
    const Point c = centroid_at(t);
    return {static_cast<int>(std::lround(c.x - (w - 1) / 2.0)), static_cast<int>(std::lround(c.y - (h - 1) / 2.0)), w,
            h};
  }
};

/// Which objects the ground truth selects, evaluated on true object states.
struct TargetRule {
  enum class Kind { kIds, kCategory, kBehind, kMovedAfter, kMoving } kind = Kind::kIds;
  std::vector<std::string> ids;  // kIds
  std::string category;          // kCategory, kMoving: subject; kBehind: reference; kMovedAfter: event subject
  int window = 6;                // kMoving, kMovedAfter: frames of history
  double theta_move = 2.0;
};

struct ScenarioSpec {
  std::string name = "scenario";
  int width = 160;
  int height = 120;
  int frames = 10;
  int embedding_dim = 32;
  unsigned seed = 1;
  std::set<Role> providers{Role::kSegmenter, Role::kDepth, Role::kDetector, Role::kEmbedder};
  std::string query;
  Category category = Category::kSemantic;
  int level = 1;
  std::vector<SynthObject> objects;
  TargetRule target;
};

struct SynthResult {
  ScenarioSpec spec;
  PerceptionTrace trace;
  std::vector<BinaryMask> gt;                        // one per frame
  std::vector<std::map<int, std::string>> det_owner;  // frame -> det_id -> object id
  ExecutionPlan expected_plan;
};

// ---- spec JSON ------------------------------------------------------------

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) -> void { throw Error(ErrorCode::kSpecError, why); };
  ScenarioSpec s;
  try {
    s.name = j.value("name", s.name);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.at("frames").get<int>();
    s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
    s.seed = j.value("seed", s.seed);
    if (j.contains("providers")) {
      s.providers.clear();
      for (const auto& p : j.at("providers")) {
        auto r = parse_role(p.get<std::string>());
        if (!r) fail("unknown provider role " + p.dump());
        s.providers.insert(*r);
      }
    }
    s.query = j.at("query").get<std::string>();
    auto cat = parse_category(j.value("category", std::string("semantic")));
    if (!cat) fail("category must be semantic, spatial or temporal");
    s.category = *cat;
    s.level = j.value("level", 1);
    for (const auto& o : j.at("objects")) {
      SynthObject obj;
      obj.id = o.at("id").get<std::string>();
      obj.category = o.at("category").get<std::string>();
      obj.cx = o.at("centroid").at(0).get<double>();
      obj.cy = o.at("centroid").at(1).get<double>();
      if (o.contains("velocity")) {
        obj.vx = o["velocity"].at(0).get<double>();
        obj.vy = o["velocity"].at(1).get<double>();
      }
      if (o.contains("size")) {
        obj.w = o["size"].at(0).get<int>();
        obj.h = o["size"].at(1).get<int>();
      }
      obj.depth = o.value("depth", obj.depth);
      obj.vz = o.value("vz", obj.vz);
      obj.appear = o.value("appear", 0);
      if (o.contains("disappear") && !o["disappear"].is_null()) obj.disappear = o["disappear"].get<int>();
      if (o.contains("dropout")) obj.dropout = o["dropout"].get<std::set<int>>();
      s.objects.push_back(std::move(obj));
    }
    const auto& t = j.at("target");
    const auto kind = t.at("kind").get<std::string>();
    if (kind == "ids") {
      s.target.kind = TargetRule::Kind::kIds;
      s.target.ids = t.at("ids").get<std::vector<std::string>>();
    } else if (kind == "category") {
      s.target.kind = TargetRule::Kind::kCategory;
      s.target.category = t.at("category").get<std::string>();
    } else if (kind == "behind") {
      s.target.kind = TargetRule::Kind::kBehind;
      s.target.category = t.at("reference").get<std::string>();
    } else if (kind == "moved_after") {
      s.target.kind = TargetRule::Kind::kMovedAfter;
      s.target.category = t.at("event").get<std::string>();
    } else if (kind == "moving") {
      s.target.kind = TargetRule::Kind::kMoving;
      s.target.category = t.at("category").get<std::string>();
    } else {
      fail("unknown target kind \"" + kind + "\"");
    }
    s.target.window = t.value("window", s.target.window);
    s.target.theta_move = t.value("theta_move", s.target.theta_move);
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return s;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  nlohmann::json providers = nlohmann::json::array();
  for (Role r : s.providers) providers.push_back(role_name(r));
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : s.objects) {
    nlohmann::json jo{{"id", o.id},
                      {"category", o.category},
                      {"centroid", {o.cx, o.cy}},
                      {"velocity", {o.vx, o.vy}},
                      {"size", {o.w, o.h}},
                      {"depth", o.depth},
                      {"vz", o.vz},
                      {"appear", o.appear},
                      {"dropout", o.dropout}};
    jo["disappear"] = o.disappear ? nlohmann::json(*o.disappear) : nlohmann::json(nullptr);
    objects.push_back(std::move(jo));
  }
  static const char* kKinds[] = {"ids", "category", "behind", "moved_after", "moving"};
  nlohmann::json target{{"kind", kKinds[static_cast<int>(s.target.kind)]},
                        {"window", s.target.window},
                        {"theta_move", s.target.theta_move}};
  switch (s.target.kind) {
    case TargetRule::Kind::kIds: target["ids"] = s.target.ids; break;
    case TargetRule::Kind::kBehind: target["reference"] = s.target.category; break;
    case TargetRule::Kind::kMovedAfter: target["event"] = s.target.category; break;
    default: target["category"] = s.target.category; break;
  }
  return {{"name", s.name},     {"width", s.width},          {"height", s.height},
          {"frames", s.frames}, {"embedding_dim", s.embedding_dim}, {"seed", s.seed},
          {"providers", providers}, {"query", s.query},      {"category", category_name(s.category)},
          {"level", s.level},   {"objects", objects},        {"target", target}};
}

// ---- generation -----------------------------------------------------------

namespace detail {

/// Orthonormal vectors via Gram-Schmidt over seeded Gaussian draws.
inline std::vector<std::vector<double>> orthonormal_embeddings(std::size_t count, int dim, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> out;
  while (out.size() < count) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = gauss(rng);
    for (const auto& u : out) {
      double dot = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) dot += v[k] * u[k];
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= dot * u[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

inline bool rects_overlap(const Bbox& a, const Bbox& b) { return bbox_intersects(a, b); }

// Brute-force target selection from true states.
inline std::vector<const SynthObject*> select_targets(const ScenarioSpec& s, int t) {
  std::vector<const SynthObject*> out;
  const auto& rule = s.target;
  auto moved_since = [&](const SynthObject& o, int from) {
    for (int k = from; k <= t; ++k) {
      if (!o.present(k)) continue;
      const Point a = o.centroid_at(k);
      const Point b = o.centroid_at(t);
      return std::hypot(a.x - b.x, a.y - b.y) > rule.theta_move;
    }
    return false;
  };
  for (const auto& o : s.objects) {
    if (!o.present(t)) continue;
    bool take = false;
    switch (rule.kind) {
      case TargetRule::Kind::kIds:
        take = std::find(rule.ids.begin(), rule.ids.end(), o.id) != rule.ids.end();
        break;
      case TargetRule::Kind::kCategory:
        take = o.category == rule.category;
        break;
      case TargetRule::Kind::kBehind:
        for (const auto& ref : s.objects) {
          if (&ref == &o || !ref.present(t) || ref.category != rule.category) continue;
          if (o.depth_at(t) > ref.depth_at(t) && rects_overlap(o.rect_at(t), ref.rect_at(t))) take = true;
        }
        break;
      case TargetRule::Kind::kMoving:
        take = o.category == rule.category && moved_since(o, std::max(0, t - rule.window));
        break;
      case TargetRule::Kind::kMovedAfter: {
        // First frame in the window at which an event object has entered.
        const int lo = std::max(0, t - rule.window);
        std::optional<int> fired;
        for (const auto& e : s.objects) {
          if (e.category != rule.category) continue;
          if (e.appear > lo && e.appear <= t) fired = std::min(fired.value_or(e.appear), e.appear);
        }
        take = fired && moved_since(o, *fired);
        break;
      }
    }
    if (take) out.push_back(&o);
  }
  return out;
}

}  // namespace detail

/// Deterministic trace, per-frame ground truth and the rule planner's plan.
inline SynthResult synth_scenario(const ScenarioSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.frames < 0) throw Error(ErrorCode::kSpecError, "bad frame geometry");
  if (!spec.providers.contains(Role::kSegmenter)) throw Error(ErrorCode::kSpecError, "segmenter provider is required");
  std::set<std::string> ids;
  for (const auto& o : spec.objects) {
    if (!ids.insert(o.id).second) throw Error(ErrorCode::kSpecError, "duplicate object id \"" + o.id + "\"");
    if (o.w < 1 || o.h < 1) throw Error(ErrorCode::kSpecError, "object \"" + o.id + "\" has empty size");
    for (int t = 0; t < spec.frames; ++t) {
      if (!o.present(t)) continue;
      const Bbox r = o.rect_at(t);
      if (r.x < 0 || r.y < 0 || r.x + r.w > spec.width || r.y + r.h > spec.height) {
        throw Error(ErrorCode::kSpecError,
                    "object \"" + o.id + "\" leaves the frame at frame " + std::to_string(t));
      }
      if (o.depth_at(t) < 0) throw Error(ErrorCode::kSpecError, "object \"" + o.id + "\" has negative depth");
    }
  }
  const bool has_embedder = spec.providers.contains(Role::kEmbedder);
  const bool has_depth = spec.providers.contains(Role::kDepth);
  const bool has_detector = spec.providers.contains(Role::kDetector);
  const int dim = has_embedder ? spec.embedding_dim : 0;
  if (has_embedder && static_cast<std::size_t>(dim) < spec.objects.size()) {
    throw Error(ErrorCode::kSpecError, "embedding_dim is smaller than the object count");
  }

  std::mt19937 rng(spec.seed);
  const auto embeddings = detail::orthonormal_embeddings(has_embedder ? spec.objects.size() : 0, dim, rng);

  SynthResult out;
  out.spec = spec;
  out.trace.header.width = spec.width;
  out.trace.header.height = spec.height;
  out.trace.header.embedding_dim = dim;
  out.trace.header.frame_count = spec.frames;
  for (Role r : spec.providers) out.trace.header.providers.push_back(role_name(r));

  for (int t = 0; t < spec.frames; ++t) {
    FrameObservation f{t, spec.width, spec.height, {}};
    std::vector<std::size_t> visible;
    for (std::size_t k = 0; k < spec.objects.size(); ++k)
      if (spec.objects[k].present(t) && !spec.objects[k].dropout.contains(t)) visible.push_back(k);
    std::shuffle(visible.begin(), visible.end(), rng);

    std::map<int, std::string> owner;
    for (std::size_t d = 0; d < visible.size(); ++d) {
      const auto& o = spec.objects[visible[d]];
      BinaryMask m(spec.width, spec.height);
      const Bbox r = o.rect_at(t);
      m.fill_rect(r.x, r.y, r.w, r.h);
      Detection det;
      det.det_id = static_cast<int>(d);
      det.category = has_detector ? o.category : "object";
      det.score = 1.0;
      det.bbox = r;
      det.mask = rle_encode(m);
      det.centroid = *mask_centroid(m);
      if (has_depth) det.depth_mean = o.depth_at(t);
      if (has_embedder) det.embedding = embeddings[visible[d]];
      owner[det.det_id] = o.id;
      f.detections.push_back(std::move(det));
    }
    out.trace.frames.push_back(std::move(f));
    out.det_owner.push_back(std::move(owner));

    BinaryMask gt(spec.width, spec.height);
    for (const SynthObject* o : detail::select_targets(spec, t)) {
      const Bbox r = o->rect_at(t);
      gt.fill_rect(r.x, r.y, r.w, r.h);
    }
    out.gt.push_back(std::move(gt));
  }
  out.expected_plan = rule_plan(spec.query);
  return out;
}

/// Flat-shaded frame image: grey background, one tone per object.
inline Image synth_frame_image(const ScenarioSpec& spec, int t) {
  Image img{spec.width, spec.height, 3,
            std::vector<std::uint8_t>(static_cast<std::size_t>(spec.width) * spec.height * 3, 96)};
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    const auto& o = spec.objects[k];
    if (!o.present(t)) continue;
    const Bbox r = o.rect_at(t);
    const std::uint8_t tone[3] = {static_cast<std::uint8_t>(60 + 50 * (k % 4)),
                                  static_cast<std::uint8_t>(200 - 40 * (k % 5)),
                                  static_cast<std::uint8_t>(90 + 30 * (k % 6))};
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y)[c] = tone[c];
  }
  return img;
}

/// Writes trace.jsonl, dataset.json, masks/<name>/fNNNN.json, plan.json,
/// scenario.json and, if asked, frames/<name>/fNNNN.png under `dir`.
inline void write_synth(const std::filesystem::path& dir, const SynthResult& r, bool frames = false) {
  namespace fs = std::filesystem;
  const auto& s = r.spec;
  fs::create_directories(dir / "masks" / s.name);
  write_trace(dir / "trace.jsonl", r.trace);
  for (int t = 0; t < s.frames; ++t) {
    write_mask_file(dir / "masks" / s.name / (frame_file_stem(t) + ".json"), r.gt[static_cast<std::size_t>(t)]);
  }
  Manifest m;
  m.samples.push_back(
      {s.name, "frames/" + s.name, s.frames, s.query, s.category, s.level, "masks/" + s.name});
  write_json_file(dir / "dataset.json", manifest_to_json(m), 2);
  write_json_file(dir / "plan.json", plan_to_json(r.expected_plan), 2);
  write_json_file(dir / "scenario.json", scenario_to_json(s), 2);
  if (frames) {
    fs::create_directories(dir / "frames" / s.name);
    for (int t = 0; t < s.frames; ++t)
      write_png(dir / "frames" / s.name / (frame_file_stem(t) + ".png"), synth_frame_image(s, t));
  }
}

// ---- templates ------------------------------------------------------------

inline std::vector<std::string> synth_template_names() {
  return {"semantic", "behind", "moved_after", "flicker"};
}

namespace detail {

inline SynthObject rect_object(std::string id, double cx, double cy, double vx, int w, int h, double depth) {
  SynthObject o;
  o.category = id;
  o.id = std::move(id);
  o.cx = cx;
  o.cy = cy;
  o.vx = vx;
  o.w = w;
  o.h = h;
  o.depth = depth;
  return o;
}

}  // namespace detail

inline ScenarioSpec synth_template(const std::string& name) {
  using detail::rect_object;
  ScenarioSpec s;
  s.name = name;
  if (name == "semantic") {
    s.frames = 8;
    s.query = "segment the cup";
    s.category = Category::kSemantic;
    s.level = 1;
    s.objects = {rect_object("cup", 40, 60, 0, 15, 21, 4.0),
                 rect_object("bottle", 100, 50, 0, 11, 31, 3.0),
                 rect_object("ball", 70, 95, 2, 9, 9, 2.0)};
    s.target.kind = TargetRule::Kind::kCategory;
    s.target.category = "cup";
  } else if (name == "behind") {
    s.frames = 8;
    s.query = "segment the object behind the table";
    s.category = Category::kSpatial;
    s.level = 2;
    s.objects = {rect_object("table", 70, 70, 0, 61, 21, 3.0),
                 rect_object("box", 60, 55, 0, 21, 21, 5.0),
                 rect_object("chair", 135, 30, 0, 15, 25, 6.0)};
    s.target.kind = TargetRule::Kind::kBehind;
    s.target.category = "table";
  } else if (name == "moved_after") {
    s.frames = 14;
    s.query = "segment whatever moved after the ball entered in the last 16 frames";
    s.category = Category::kTemporal;
    s.level = 2;
    s.objects = {rect_object("ball", 120, 90, 0, 9, 9, 2.0),
                 rect_object("car", 20, 40, 3, 21, 11, 4.0),
                 rect_object("box", 80, 95, 0, 15, 15, 3.0)};
    s.objects[0].appear = 3;
    s.target.kind = TargetRule::Kind::kMovedAfter;
    s.target.category = "ball";
    s.target.window = 16;
  } else if (name == "flicker") {
    s.frames = 12;
    s.query = "segment the moving ball";
    s.category = Category::kTemporal;
    s.level = 1;
    s.objects = {rect_object("ball", 20, 60, 4, 11, 11, 2.0), rect_object("cup", 120, 30, 0, 13, 17, 3.0)};
    s.objects[0].dropout = {6};
    s.target.kind = TargetRule::Kind::kMoving;
    s.target.category = "ball";
  } else {
    throw Error(ErrorCode::kSpecError, "unknown template \"" + name + "\"; known: " + join(synth_template_names(), ", "));
  }
  return s;
}

/// Random linear-motion scene with 2-5 objects and per-frame displacement
/// under 10% of the frame diagonal; objects stay inside the frame.
inline ScenarioSpec random_tracking_scenario(unsigned seed, int frames = 20) {
  std::mt19937 rng(seed);
  ScenarioSpec s;
  s.name = "tracking_" + std::to_string(seed);
  s.seed = seed;
  s.frames = frames;
  s.query = "segment all objects";
  std::uniform_int_distribution<int> count(2, 5);
  std::uniform_int_distribution<int> half(3, 7);
  std::uniform_real_distribution<double> speed(-4.0, 4.0);
  const int n = count(rng);
  static const char* kCats[] = {"cup", "ball", "car", "box", "chair"};
  for (int k = 0; k < n; ++k) {
    SynthObject o;
    o.id = "obj" + std::to_string(k);
    o.category = kCats[k];
    o.w = 2 * half(rng) + 1;
    o.h = 2 * half(rng) + 1;
    o.vx = std::round(speed(rng));
    o.vy = std::round(speed(rng));
    // Pick a start so the whole trajectory stays inside the frame.
    const double span_x = std::abs(o.vx) * (frames - 1);
    const double span_y = std::abs(o.vy) * (frames - 1);
    const double min_x = (o.w - 1) / 2.0 + (o.vx < 0 ? span_x : 0.0);
    const double max_x = s.width - 1 - (o.w - 1) / 2.0 - (o.vx > 0 ? span_x : 0.0);
    const double min_y = (o.h - 1) / 2.0 + (o.vy < 0 ? span_y : 0.0);
    const double max_y = s.height - 1 - (o.h - 1) / 2.0 - (o.vy > 0 ? span_y : 0.0);
    o.cx = std::round(std::uniform_real_distribution<double>(min_x, max_x)(rng));
    o.cy = std::round(std::uniform_real_distribution<double>(min_y, max_y)(rng));
    o.depth = 1.0 + k;
    s.objects.push_back(o);
  }
  s.target.kind = TargetRule::Kind::kIds;
  for (const auto& o : s.objects) s.target.ids.push_back(o.id);
  return s;
}

}  // namespace jitwin
