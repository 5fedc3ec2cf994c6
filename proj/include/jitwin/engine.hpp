#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/dsl.hpp"
#include "jitwin/error.hpp"
#include "jitwin/evaluation.hpp"
#include "jitwin/image_io.hpp"
#include "jitwin/mask_pipeline.hpp"
#include "jitwin/perception.hpp"
#include "jitwin/planner.hpp"
#include "jitwin/reasoner.hpp"
#include "jitwin/twin.hpp"

namespace jitwin {

struct EngineConfig {
  int window = 6;
  double lambda = 0.5;
  double alpha = 0.8;
  double tau_match = 0.6;
  double binarize_threshold = 0.5;
  double theta_move = 2.0;
  bool model_selection = true;
  bool dt_update = true;
  bool temporal_integration = true;

  RulePlannerOptions planner_options() const { return {window, {lambda, tau_match}}; }
};

/// Overrides the fields present in `j`; unknown keys are rejected.
inline void apply_config_json(EngineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "window") c.window = v.get<int>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "tau_match") c.tau_match = v.get<double>();
      else if (key == "binarize_threshold") c.binarize_threshold = v.get<double>();
      else if (key == "theta_move") c.theta_move = v.get<double>();
      else if (key == "model_selection") c.model_selection = v.get<bool>();
      else if (key == "dt_update") c.dt_update = v.get<bool>();
      else if (key == "temporal_integration") c.temporal_integration = v.get<bool>();
      else throw Error(ErrorCode::kSchemaError, "config: unknown key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("config: ") + e.what());
  }
  if (c.window < 0) throw Error(ErrorCode::kSchemaError, "config: window must be >= 0");
  if (!(c.alpha > 0 && c.alpha <= 1)) throw Error(ErrorCode::kSchemaError, "config: alpha must lie in (0,1]");
  if (!(c.binarize_threshold > 0 && c.binarize_threshold < 1))
    throw Error(ErrorCode::kSchemaError, "config: binarize_threshold must lie in (0,1)");
}

/// Relation labels the plan's programs can consult; the twin computes only these.
inline std::set<RelationLabel> relations_for_plan(const ExecutionPlan& plan) {
  std::set<RelationLabel> out;
  std::function<void(const dsl::Expr&)> walk = [&](const dsl::Expr& e) {
    switch (e.op) {
      case dsl::Op::kBehind: out.insert(RelationLabel::kBehind); break;
      case dsl::Op::kInFrontOf: out.insert(RelationLabel::kInFrontOf); break;
      case dsl::Op::kAbove: out.insert(RelationLabel::kAbove); break;
      case dsl::Op::kBelow: out.insert(RelationLabel::kBelow); break;
      case dsl::Op::kLeftOf: out.insert(RelationLabel::kLeftOf); break;
      case dsl::Op::kRightOf: out.insert(RelationLabel::kRightOf); break;
      case dsl::Op::kNear: out.insert(RelationLabel::kNear); break;
      case dsl::Op::kOverlaps: out.insert(RelationLabel::kOverlaps); break;
      case dsl::Op::kMovingToward: out.insert(RelationLabel::kMovingToward); break;
      default: break;
    }
    for (const auto& a : e.args) walk(a);
  };
  for (const auto& [id, src] : plan.programs) walk(dsl::parse_program_any(src).root);
  return out;
}

/// Drops the outputs of roles the plan did not select.
inline FrameObservation project_roles(FrameObservation obs, const std::set<Role>& active) {
  for (auto& d : obs.detections) {
    if (!active.contains(Role::kDepth)) d.depth_mean.reset();
    if (!active.contains(Role::kDetector)) d.category = "object";
    if (!active.contains(Role::kEmbedder)) d.embedding.clear();
  }
  return obs;
}

struct FrameResult {
  int frame_index = 0;
  ObjectSet selected;  // R_t restricted to objects present at the frame
  BinaryMask mask;     // smoothed and binarized output
};

/// Executes a validated plan frame by frame. Memory is bounded by the twin
/// window and one smoothing buffer.
class Engine {
 public:
  Engine(ExecutionPlan plan, const EngineConfig& config, const ProviderSet& available, SemanticProvider& semantics)
      : plan_(std::move(plan)), semantics_(semantics), twin_(make_twin_config(config)) {
    if (!config.model_selection) disable_model_selection(plan_, available);
    require_valid(plan_);
    for (const auto& m : plan_.models) {
      if (!available.has(m.role)) {
        throw Error(ErrorCode::kMissingCapability,
                    "plan selects the " + role_name(m.role) + " role but the perception source lacks it");
      }
      active_.insert(m.role);
    }
    TwinConfig tc = twin_.config();
    tc.window = plan_.window_size;
    tc.lambda = plan_.tracking.lambda;
    tc.tau_match = plan_.tracking.tau_match;
    tc.relations = config.model_selection ? relations_for_plan(plan_) : all_relation_labels();
    if (!active_.contains(Role::kDepth)) std::erase_if(tc.relations, needs_depth);
    twin_ = TwinState(tc);

    for (const auto& id : topo_order(plan_)) {
      const PlanNode* n = plan_.find(id);
      if (n->kind == NodeKind::kReasoning) {
        order_.push_back(id);
        programs_.emplace(id, dsl::parse_program_any(plan_.programs.at(id)).root);
      }
    }
    options_.theta_move = config.theta_move;
    smoother_.alpha = config.temporal_integration ? config.alpha : 1.0;
    smoother_.binarize_threshold = config.binarize_threshold;
  }

  FrameResult step(const FrameObservation& obs) {
    twin_.update(project_roles(obs, active_));
    std::map<std::string, ObjectSet> results;
    EvalContext ctx{twin_, semantics_, options_, &programs_, &results};
    for (const auto& id : order_) results[id] = eval_expr(programs_.at(id), ctx);

    const SceneGraph& g = twin_.current();
    FrameResult out;
    out.frame_index = obs.frame_index;
    for (TrackId id : results.at(plan_.output_node))
      if (g.find(id)) out.selected.insert(id);
    const BinaryMask raw = generate_mask(out.selected, g);
    out.mask = binarize(smooth(smoother_, raw), smoother_.binarize_threshold);
    return out;
  }

  const ExecutionPlan& plan() const { return plan_; }
  const TwinState& twin() const { return twin_; }
  const SmootherState& smoother() const { return smoother_; }
  const std::set<Role>& active_roles() const { return active_; }

 private:
  static TwinConfig make_twin_config(const EngineConfig& c) {
    TwinConfig tc;
    tc.window = c.window;
    tc.lambda = c.lambda;
    tc.tau_match = c.tau_match;
    tc.dt_update = c.dt_update;
    tc.temporal_integration = c.temporal_integration;
    return tc;
  }

  ExecutionPlan plan_;
  SemanticProvider& semantics_;
  TwinState twin_;
  std::set<Role> active_;
  std::vector<std::string> order_;
  std::map<std::string, dsl::Expr> programs_;
  EvalOptions options_;
  SmootherState smoother_;
};

// ---- predictions directory ------------------------------------------------

struct RunOptions {
  std::string query_id = "query";
  bool emit_twin = false;
};

struct RunSummary {
  int frames = 0;
  std::string prefix;
};

/// Streams every observation through the engine, writing one RLE file per
/// frame as it is produced and merging the query into predictions.json.
inline RunSummary run_to_directory(ObservationStream& stream, Engine& engine, const std::filesystem::path& out_dir,
                                   const RunOptions& options = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  PredictionIndex idx = load_prediction_index(out_dir);
  RunSummary summary;
  summary.prefix = idx.prefix_for(options.query_id);
  auto& files = idx.queries[options.query_id];
  files.clear();
  if (options.emit_twin) fs::create_directories(out_dir / "twin");

  while (auto obs = stream.next()) {
    FrameResult r = engine.step(*obs);
    const std::string name = summary.prefix + "_" + frame_file_stem(r.frame_index);
    write_mask_file(out_dir / (name + ".json"), r.mask);
    files.push_back(name + ".json");
    if (options.emit_twin) {
      nlohmann::json snap = snapshot_json(engine.twin().current());
      snap["selected"] = r.selected;
      write_json_file(out_dir / "twin" / (name + ".json"), snap);
    }
    ++summary.frames;
  }
  write_json_file(out_dir / "predictions.json", index_to_json(idx), 2);
  return summary;
}

}  // namespace jitwin
