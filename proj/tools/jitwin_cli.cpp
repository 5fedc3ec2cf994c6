// jitwin: plan, run, evaluate, synthesize and render reasoning-segmentation jobs.
//
// Exit codes: 0 ok, 2 invalid input, 3 provider failure, 4 internal error.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "jitwin/engine.hpp"
#include "jitwin/evaluation.hpp"
#include "jitwin/image_io.hpp"
#include "jitwin/planner.hpp"
#include "jitwin/synth.hpp"

namespace fs = std::filesystem;
using namespace jitwin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitProvider = 3;
constexpr int kExitInternal = 4;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kProviderError:
    case ErrorCode::kProviderUnreachable:
    case ErrorCode::kSemanticProviderError:
      return kExitProvider;
    case ErrorCode::kUnknownTrackId:
      return kExitInternal;
    default:
      return kExitInvalid;
  }
}

struct PlannerFlags {
  bool rule = false;
  std::string endpoint;
  std::string model;

  void add(CLI::App* cmd) {
    cmd->add_flag("--rule", rule, "Use the offline rule planner");
    cmd->add_option("--endpoint", endpoint, "Chat-completions URL (default: $TWIN_LLM_ENDPOINT)");
    cmd->add_option("--model", model, "Model name sent to the endpoint (default: $TWIN_LLM_MODEL)");
  }

  std::optional<ChatEndpoint> chat() const {
    if (rule) return std::nullopt;
    auto ep = ChatEndpoint::from_env();
    if (!endpoint.empty()) {
      if (!ep) ep = ChatEndpoint{};
      ep->url = endpoint;
    }
    if (ep && !model.empty()) ep->model = model;
    return ep;
  }

  PlannerProvider provider() const {
    if (auto ep = chat()) return PlannerProvider::chat(*ep);
    return PlannerProvider::rule_based();
  }
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

EngineConfig load_config(const std::string& path) {
  EngineConfig c;
  if (!path.empty()) apply_config_json(c, read_json_file(path));
  return c;
}

int cmd_plan(const std::string& query, const PlannerFlags& flags, const std::string& config_path) {
  const EngineConfig config = load_config(config_path);
  auto plan = plan_query(query, flags.provider(), config.planner_options(), warn);
  std::cout << plan_to_json(plan).dump(2) << "\n";
  return kExitOk;
}

struct RunFlags {
  std::string trace;
  std::string query;
  std::string plan;
  std::string out;
  std::string query_id = "query";
  std::string config;
  std::string semantics = "keyword";
  bool no_ms = false;
  bool no_dt_update = false;
  bool no_ti = false;
  bool emit_twin = false;
};

int cmd_run(const RunFlags& f, const PlannerFlags& pf) {
  EngineConfig config = load_config(f.config);
  if (f.no_ms) config.model_selection = false;
  if (f.no_dt_update) config.dt_update = false;
  if (f.no_ti) config.temporal_integration = false;

  ExecutionPlan plan;
  if (!f.plan.empty()) {
    plan = plan_from_json(read_json_file(f.plan));
  } else {
    plan = plan_query(f.query, pf.provider(), config.planner_options(), warn);
  }

  std::unique_ptr<SemanticProvider> semantics;
  if (f.semantics == "chat") {
    auto ep = pf.chat();
    if (!ep) throw Error(ErrorCode::kProviderUnreachable, "--semantics chat needs an endpoint");
    semantics = std::make_unique<ChatSemantics>(*ep);
  } else {
    semantics = std::make_unique<KeywordSemantics>();
  }

  TraceReader reader(f.trace);
  Engine engine(plan, config, reader.header().provider_set(), *semantics);
  auto summary = run_to_directory(reader, engine, f.out, {f.query_id, f.emit_twin});
  std::cerr << "wrote " << summary.frames << " frame(s) for query \"" << f.query_id << "\" to " << f.out << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& predictions, const std::string& dataset, const std::string& report_path) {
  const Manifest m = load_manifest(dataset);
  const MetricReport r = evaluate_dataset(m, predictions);
  if (!report_path.empty()) write_json_file(report_path, report_to_json(r), 2);
  for (const auto& s : r.samples) {
    std::cout << s.id << "  " << category_name(s.category) << " L" << s.level << "  J=" << format_number(s.j)
              << "  F=" << format_number(s.f) << "  frames=" << s.frames << "\n";
  }
  std::cout << "\n" << render_table(r);
  return kExitOk;
}

int cmd_synth(const std::string& tmpl, const std::string& scenario, const std::string& out, bool frames) {
  ScenarioSpec spec;
  if (!scenario.empty()) {
    spec = scenario_from_json(read_json_file(scenario));
  } else {
    spec = synth_template(tmpl);
  }
  auto result = synth_scenario(spec);
  write_synth(out, result, frames);
  std::cerr << "wrote scenario \"" << spec.name << "\" (" << spec.frames << " frames) to " << out << "\n";
  return kExitOk;
}

int cmd_render(const std::string& frames_dir, const std::string& predictions, const std::string& query_id,
               const std::string& out, double alpha) {
  const PredictionIndex idx = load_prediction_index(predictions);
  auto it = idx.queries.find(query_id);
  if (it == idx.queries.end()) {
    throw Error(ErrorCode::kSchemaError, "predictions index has no query \"" + query_id + "\"");
  }
  fs::create_directories(out);
  int written = 0;
  for (const auto& name : it->second) {
    auto frame = frame_of_file(name);
    if (!frame) continue;
    const auto src = fs::path(frames_dir) / (frame_file_stem(*frame) + ".png");
    Image img = read_png(src, 3);
    BinaryMask m = read_mask_file(fs::path(predictions) / name);
    write_png(fs::path(out) / (frame_file_stem(*frame) + ".png"), overlay(std::move(img), m, {255, 32, 32}, alpha));
    ++written;
  }
  std::cerr << "rendered " << written << " frame(s) to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Just-in-time digital twin for reasoning segmentation"};
  app.require_subcommand(1);

  PlannerFlags planner_flags;

  std::string plan_query_text;
  std::string plan_config;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a query and print the plan JSON");
  plan_cmd->add_option("query", plan_query_text, "Natural-language query")->required();
  plan_cmd->add_option("--config", plan_config, "EngineConfig JSON overrides");
  planner_flags.add(plan_cmd);

  RunFlags run;
  PlannerFlags run_planner;
  auto* run_cmd = app.add_subcommand("run", "Run a query over a perception trace");
  run_cmd->add_option("--trace", run.trace, "Perception trace (JSONL)")->required()->check(CLI::ExistingFile);
  auto* q = run_cmd->add_option("--query", run.query, "Natural-language query");
  auto* p = run_cmd->add_option("--plan", run.plan, "Plan JSON file")->check(CLI::ExistingFile);
  q->excludes(p);
  run_cmd->add_option("--out", run.out, "Predictions directory")->required();
  run_cmd->add_option("--query-id", run.query_id, "Key of this query in predictions.json");
  run_cmd->add_option("--config", run.config, "EngineConfig JSON overrides")->check(CLI::ExistingFile);
  run_cmd->add_option("--semantics", run.semantics, "Semantic selection backend")
      ->check(CLI::IsMember({"keyword", "chat"}));
  run_cmd->add_flag("--no-ms", run.no_ms, "Disable query-specific model selection");
  run_cmd->add_flag("--no-dt-update", run.no_dt_update, "Disable cross-frame identity updates");
  run_cmd->add_flag("--no-ti", run.no_ti, "Disable temporal integration (window 0, alpha 1)");
  run_cmd->add_flag("--emit-twin", run.emit_twin, "Also write per-frame twin snapshots");
  run_planner.add(run_cmd);

  std::string eval_predictions;
  std::string eval_dataset;
  std::string eval_report;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a dataset manifest");
  eval_cmd->add_option("--predictions", eval_predictions, "Predictions directory")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset.json")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval_report, "Write the JSON report here");

  std::string synth_template_name;
  std::string synth_scenario_path;
  std::string synth_out;
  bool synth_frames = false;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scenario");
  auto* t = synth_cmd->add_option("--template", synth_template_name, "Built-in template")
                ->check(CLI::IsMember(synth_template_names()));
  auto* s = synth_cmd->add_option("--scenario", synth_scenario_path, "Scenario spec JSON")->check(CLI::ExistingFile);
  t->excludes(s);
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_flag("--frames", synth_frames, "Also write frame images");

  std::string render_frames;
  std::string render_predictions;
  std::string render_query = "query";
  std::string render_out;
  double render_alpha = 0.5;
  auto* render_cmd = app.add_subcommand("render", "Overlay predicted masks on frame images");
  render_cmd->add_option("--frames", render_frames, "Directory of fNNNN.png frames")->required();
  render_cmd->add_option("--predictions", render_predictions, "Predictions directory")->required();
  render_cmd->add_option("--query-id", render_query, "Query to render");
  render_cmd->add_option("--out", render_out, "Output directory")->required();
  render_cmd->add_option("--alpha", render_alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*plan_cmd) return cmd_plan(plan_query_text, planner_flags, plan_config);
    if (*run_cmd) {
      if (run.query.empty() && run.plan.empty()) throw Error(ErrorCode::kPlanInvalid, "run needs --query or --plan");
      return cmd_run(run, run_planner);
    }
    if (*eval_cmd) return cmd_eval(eval_predictions, eval_dataset, eval_report);
    if (*synth_cmd) {
      if (synth_template_name.empty() && synth_scenario_path.empty())
        throw Error(ErrorCode::kSpecError, "synth needs --template or --scenario");
      return cmd_synth(synth_template_name, synth_scenario_path, synth_out, synth_frames);
    }
    if (*render_cmd) return cmd_render(render_frames, render_predictions, render_query, render_out, render_alpha);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
