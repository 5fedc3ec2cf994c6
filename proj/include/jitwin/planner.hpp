#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jitwin/chat.hpp"
#include "jitwin/dsl.hpp"
#include "jitwin/error.hpp"
#include "jitwin/perception.hpp"
#include "jitwin/planner_prompt.hpp"
#include "jitwin/text.hpp"

namespace jitwin {

enum class NodeKind { kPerception, kState, kReasoning };

inline std::string_view kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kPerception: return "perception";
    case NodeKind::kState: return "state";
    case NodeKind::kReasoning: return "reasoning";
  }
  return "unknown";
}

struct PlanNode {
  std::string id;
  NodeKind kind = NodeKind::kReasoning;
  std::string op;  // role name, "twin", or the program's root operator
  std::map<std::string, std::string> params;
  std::vector<std::string> deps;

  bool operator==(const PlanNode&) const = default;
};

struct ModelChoice {
  Role role = Role::kSegmenter;
  std::string justification;

  bool operator==(const ModelChoice&) const = default;
};

struct TrackingParams {
  double lambda = 0.5;
  double tau_match = 0.6;

  bool operator==(const TrackingParams&) const = default;
};

struct ExecutionPlan {
  std::string query;
  std::vector<ModelChoice> models;
  int window_size = 6;
  TrackingParams tracking;
  std::vector<PlanNode> nodes;
  std::string output_node;
  std::map<std::string, std::string> programs;

  bool has_model(Role r) const {
    return std::any_of(models.begin(), models.end(), [r](const ModelChoice& m) { return m.role == r; });
  }
  const PlanNode* find(std::string_view id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  bool operator==(const ExecutionPlan&) const = default;
};

inline constexpr int kPlanSchemaVersion = 1;

// ---- JSON -----------------------------------------------------------------

inline nlohmann::json plan_to_json(const ExecutionPlan& p) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : p.models) models.push_back({{"role", role_name(m.role)}, {"justification", m.justification}});
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : p.nodes) {
    nodes.push_back(
        {{"id", n.id}, {"kind", kind_name(n.kind)}, {"op", n.op}, {"params", n.params}, {"deps", n.deps}});
  }
  return {{"version", kPlanSchemaVersion},
          {"query", p.query},
          {"models", std::move(models)},
          {"window_size", p.window_size},
          {"tracking", {{"lambda", p.tracking.lambda}, {"tau_match", p.tracking.tau_match}}},
          {"nodes", std::move(nodes)},
          {"output_node", p.output_node},
          {"programs", p.programs}};
}

/// Structural decode. Semantic checks are left to validate_plan.
inline ExecutionPlan plan_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) -> void { throw Error(ErrorCode::kPlanInvalid, "schema: " + why); };
  if (!j.is_object()) fail("plan must be a JSON object");
  if (j.value("version", 0) != kPlanSchemaVersion) fail("unsupported or missing version");
  ExecutionPlan p;
  try {
    p.query = j.at("query").get<std::string>();
    for (const auto& m : j.at("models")) {
      auto role = parse_role(m.at("role").get<std::string>());
      if (!role) fail("unknown model role '" + m.at("role").get<std::string>() + "'");
      p.models.push_back({*role, m.value("justification", std::string())});
    }
    p.window_size = j.at("window_size").get<int>();
    const auto& t = j.at("tracking");
    p.tracking = {t.at("lambda").get<double>(), t.at("tau_match").get<double>()};
    for (const auto& n : j.at("nodes")) {
      PlanNode node;
      node.id = n.at("id").get<std::string>();
      const auto kind = n.at("kind").get<std::string>();
      if (kind == "perception") node.kind = NodeKind::kPerception;
      else if (kind == "state") node.kind = NodeKind::kState;
      else if (kind == "reasoning") node.kind = NodeKind::kReasoning;
      else fail("kind partition: node '" + node.id + "' has unknown kind '" + kind + "'");
      node.op = n.value("op", std::string());
      if (n.contains("params")) {
        for (const auto& [k, v] : n.at("params").items())
          node.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      if (n.contains("deps")) node.deps = n.at("deps").get<std::vector<std::string>>();
      p.nodes.push_back(std::move(node));
    }
    p.output_node = j.at("output_node").get<std::string>();
    if (j.contains("programs")) p.programs = j.at("programs").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return p;
}

// ---- validation -----------------------------------------------------------

namespace detail {

/// First cycle found, rotated to start at its smallest id.
inline std::optional<std::vector<std::string>> find_cycle(const ExecutionPlan& plan) {
  std::map<std::string, const PlanNode*> by_id;
  for (const auto& n : plan.nodes) by_id.emplace(n.id, &n);
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::optional<std::vector<std::string>> found;

  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (found) return;
    state[id] = 1;
    stack.push_back(id);
    for (const auto& dep : by_id.at(id)->deps) {
      if (!by_id.contains(dep) || found) continue;
      if (state[dep] == 1) {
        auto start = std::find(stack.begin(), stack.end(), dep);
        std::vector<std::string> cycle(start, stack.end());
        std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
        found = std::move(cycle);
        return;
      }
      if (state[dep] == 0) visit(dep);
    }
    stack.pop_back();
    state[id] = 2;
  };
  for (const auto& [id, _] : by_id)
    if (state[id] == 0) visit(id);
  return found;
}

}  // namespace detail

/// Returns the reasons the plan is invalid; empty means valid. Never throws.
inline std::vector<std::string> validate_plan(const ExecutionPlan& plan) {
  std::vector<std::string> reasons;
  std::map<std::string, const PlanNode*> by_id;
  for (const auto& n : plan.nodes)
    if (!by_id.emplace(n.id, &n).second) reasons.push_back("duplicate id: " + n.id);

  bool deps_resolve = true;
  for (const auto& n : plan.nodes)
    for (const auto& d : n.deps)
      if (!by_id.contains(d)) {
        reasons.push_back("unknown dep: " + n.id + " -> " + d);
        deps_resolve = false;
      }

  std::optional<std::vector<std::string>> cycle;
  if (deps_resolve && reasons.empty()) {
    cycle = detail::find_cycle(plan);
    if (cycle) reasons.push_back("cycle: " + join(*cycle, ","));
  }

  // V = V_p ∪ V_s ∪ V_r
  std::vector<const PlanNode*> states;
  for (const auto& n : plan.nodes) {
    switch (n.kind) {
      case NodeKind::kPerception:
        if (!n.deps.empty()) reasons.push_back("kind partition: perception node '" + n.id + "' has deps");
        if (!parse_role(n.op)) reasons.push_back("kind partition: perception node '" + n.id + "' has unknown role '" + n.op + "'");
        break;
      case NodeKind::kState:
        states.push_back(&n);
        for (const auto& d : n.deps)
          if (by_id.contains(d) && by_id.at(d)->kind != NodeKind::kPerception)
            reasons.push_back("kind partition: state node '" + n.id + "' depends on non-perception node '" + d + "'");
        break;
      case NodeKind::kReasoning:
        for (const auto& d : n.deps)
          if (by_id.contains(d) && by_id.at(d)->kind == NodeKind::kPerception)
            reasons.push_back("kind partition: reasoning node '" + n.id + "' depends directly on perception node '" + d + "'");
        break;
    }
    if (n.kind != NodeKind::kReasoning && plan.programs.contains(n.id))
      reasons.push_back("kind partition: non-reasoning node '" + n.id + "' has a program");
  }
  if (states.size() != 1) {
    reasons.push_back("kind partition: expected exactly one state node, found " + std::to_string(states.size()));
  }

  // Reasoning nodes must reach the state node through their deps.
  if (states.size() == 1 && deps_resolve && !cycle) {
    const std::string& state_id = states.front()->id;
    std::map<std::string, bool> reaches;
    std::function<bool(const std::string&)> reach = [&](const std::string& id) -> bool {
      if (id == state_id) return true;
      if (auto it = reaches.find(id); it != reaches.end()) return it->second;
      bool r = false;
      for (const auto& d : by_id.at(id)->deps) r = r || reach(d);
      return reaches[id] = r;
    };
    for (const auto& n : plan.nodes)
      if (n.kind == NodeKind::kReasoning && !reach(n.id))
        reasons.push_back("kind partition: reasoning node '" + n.id + "' does not depend on the state node");
  }

  // Output node.
  if (auto it = by_id.find(plan.output_node); it == by_id.end()) {
    reasons.push_back("output node: '" + plan.output_node + "' not found");
  } else {
    if (it->second->kind != NodeKind::kReasoning)
      reasons.push_back("output node: '" + plan.output_node + "' is not a reasoning node");
    for (const auto& n : plan.nodes)
      if (std::find(n.deps.begin(), n.deps.end(), plan.output_node) != n.deps.end())
        reasons.push_back("output node: '" + plan.output_node + "' has dependent '" + n.id + "'");
  }

  // Programs and the capabilities they need.
  std::set<Role> needed;
  for (const auto& n : plan.nodes) {
    if (n.kind != NodeKind::kReasoning) continue;
    auto src = plan.programs.find(n.id);
    if (src == plan.programs.end()) {
      reasons.push_back("program: reasoning node '" + n.id + "' has no program");
      continue;
    }
    try {
      auto prog = dsl::parse_program_any(src->second);
      for (const auto& ref : dsl::input_refs(prog.root))
        if (std::find(n.deps.begin(), n.deps.end(), ref) == n.deps.end())
          reasons.push_back("program: '" + n.id + "' reads input '" + ref + "' which is not among its deps");
      auto roles = dsl::required_roles(prog.root);
      needed.insert(roles.begin(), roles.end());
    } catch (const Error& e) {
      reasons.push_back("program: '" + n.id + "': " + e.what());
    }
  }
  for (const auto& [id, _] : plan.programs)
    if (!by_id.contains(id)) reasons.push_back("program: '" + id + "' does not name a node");
  for (Role r : needed)
    if (!plan.has_model(r)) reasons.push_back("missing capability: " + role_name(r));

  if (plan.window_size < 0) reasons.push_back("window_size: must be >= 0");
  if (plan.tracking.lambda < 0) reasons.push_back("tracking: lambda must be >= 0");
  if (!(plan.tracking.tau_match > 0 && plan.tracking.tau_match < 1))
    reasons.push_back("tracking: tau_match must lie in (0,1)");
  return reasons;
}

inline void require_valid(const ExecutionPlan& plan) {
  auto reasons = validate_plan(plan);
  if (!reasons.empty()) throw Error(ErrorCode::kPlanInvalid, join(reasons, "; "));
}

/// Kahn's algorithm with lexicographic tie-breaking. Precondition: valid plan.
inline std::vector<std::string> topo_order(const ExecutionPlan& plan) {
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& n : plan.nodes) {
    pending[n.id] += 0;
    for (const auto& d : n.deps) {
      ++pending[n.id];
      dependents[d].push_back(n.id);
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, count] : pending)
    if (count == 0) ready.push(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : dependents[id])
      if (--pending[next] == 0) ready.push(next);
  }
  return order;
}

// ---- rule-based planner ---------------------------------------------------

struct RulePlannerOptions {
  int default_window = 6;
  TrackingParams tracking;
};

namespace rules {

// Object vocabulary: COCO categories plus a few common scene nouns.
inline const std::set<std::string>& vocabulary() {
  static const std::set<std::string> kWords = {
      "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat", "traffic light",
      "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
      "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag", "tie", "suitcase", "frisbee",
      "skis", "snowboard", "ball", "kite", "baseball bat", "baseball glove", "skateboard", "surfboard",
      "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple",
      "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch",
      "potted plant", "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard",
      "cell phone", "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
      "teddy bear", "hair drier", "toothbrush", "table", "box", "lamp", "door", "window", "plant", "toy", "bag",
      "shelf", "desk", "sofa", "phone", "man", "woman", "child", "boy", "girl", "robot", "block", "can",
      "monitor", "screen", "animal", "vehicle", "glass", "mug", "plate", "pen", "hat", "shoe"};
  return kWords;
}

inline const std::set<std::string>& generic_words() {
  static const std::set<std::string> kWords = {"object", "objects", "thing", "things", "whatever", "something",
                                               "anything", "everything", "item", "items", "what", "which",
                                               "one", "ones", "stuff"};
  return kWords;
}

inline const std::set<std::string>& filler_words() {
  static const std::set<std::string> kWords = {
      "segment", "find", "show", "highlight", "mark", "select", "track", "me", "the", "a", "an", "that", "who",
      "is", "are", "was", "were", "has", "have", "had", "been", "all", "of", "in", "on", "to", "please", "any",
      "where", "when", "it", "its", "this", "those", "these", "there", "and", "with", "from", "video", "scene",
      "by", "at", "just", "currently", "now", "then", "first", "frame", "frames", "last", "past", "within"};
  return kWords;
}

struct Phrase {
  std::vector<std::string> words;
  dsl::Op op;
};

inline const std::vector<Phrase>& spatial_phrases() {
  static const std::vector<Phrase> kPhrases = {
      {{"in", "front", "of"}, dsl::Op::kInFrontOf}, {{"on", "top", "of"}, dsl::Op::kAbove},
      {{"next", "to"}, dsl::Op::kNear},             {{"close", "to"}, dsl::Op::kNear},
      {{"closest", "to"}, dsl::Op::kClosestTo},     {{"nearest", "to"}, dsl::Op::kClosestTo},
      {{"farthest", "from"}, dsl::Op::kFarthestFrom}, {{"left", "of"}, dsl::Op::kLeftOf},
      {{"right", "of"}, dsl::Op::kRightOf},         {{"behind"}, dsl::Op::kBehind},
      {{"above"}, dsl::Op::kAbove},                 {{"over"}, dsl::Op::kAbove},
      {{"below"}, dsl::Op::kBelow},                 {{"under"}, dsl::Op::kBelow},
      {{"beneath"}, dsl::Op::kBelow},               {{"underneath"}, dsl::Op::kBelow},
      {{"near"}, dsl::Op::kNear},                   {{"beside"}, dsl::Op::kNear},
      {{"overlapping"}, dsl::Op::kOverlaps},        {{"overlaps"}, dsl::Op::kOverlaps},
  };
  return kPhrases;
}

inline std::optional<dsl::Op> temporal_verb(const std::vector<std::string>& words, std::size_t i) {
  static const std::map<std::string, dsl::Op> kVerbs = {
      {"moved", dsl::Op::kMoved},        {"moving", dsl::Op::kMoved},         {"move", dsl::Op::kMoved},
      {"moves", dsl::Op::kMoved},        {"entered", dsl::Op::kEntered},      {"enters", dsl::Op::kEntered},
      {"entering", dsl::Op::kEntered},   {"appeared", dsl::Op::kEntered},     {"appears", dsl::Op::kEntered},
      {"arrived", dsl::Op::kEntered},    {"exited", dsl::Op::kExited},        {"exits", dsl::Op::kExited},
      {"exiting", dsl::Op::kExited},     {"leaves", dsl::Op::kExited},        {"disappeared", dsl::Op::kExited},
      {"left", dsl::Op::kExited},        {"toward", dsl::Op::kMovingToward},  {"towards", dsl::Op::kMovingToward},
      {"approaching", dsl::Op::kMovingToward}, {"approached", dsl::Op::kMovingToward}};
  auto it = kVerbs.find(words[i]);
  if (it == kVerbs.end()) return std::nullopt;
  if (words[i] == "left" && i + 1 < words.size() && words[i + 1] == "of") return std::nullopt;
  return it->second;
}

inline const std::map<std::string, dsl::Op>& connectors() {
  static const std::map<std::string, dsl::Op> kConnectors = {{"after", dsl::Op::kAfter},
                                                             {"once", dsl::Op::kAfter},
                                                             {"while", dsl::Op::kAfter},
                                                             {"before", dsl::Op::kBefore},
                                                             {"until", dsl::Op::kBefore}};
  return kConnectors;
}

using Words = std::vector<std::string>;

/// Builds plan nodes bottom-up while the query is parsed.
class Composer {
 public:
  bool spatial = false;
  bool temporal = false;
  bool semantic = false;
  std::vector<PlanNode> nodes;
  std::map<std::string, std::string> programs;

  /// Returns an expression for the clause; non-trivial sub-expressions become
  /// nodes referenced through (input ...).
  dsl::Expr clause(Words w) {
    for (std::size_t i = 0; i < w.size(); ++i)
      for (const auto& p : spatial_phrases()) {
        if (i + p.words.size() > w.size() || !std::equal(p.words.begin(), p.words.end(), w.begin() + i)) continue;
        spatial = true;
        Words subj(w.begin(), w.begin() + i);
        Words ref(w.begin() + i + p.words.size(), w.end());
        dsl::Expr lhs = clause(subj);
        dsl::Expr rhs = clause(ref);
        return emit(dsl::node(p.op, {std::move(lhs), std::move(rhs)}));
      }
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto verb = temporal_verb(w, i);
      if (!verb) continue;
      temporal = true;
      if (*verb == dsl::Op::kMovingToward) {
        Words subj(w.begin(), w.begin() + i);
        Words ref(w.begin() + i + 1, w.end());
        std::erase_if(subj, [&](const std::string& s) { return temporal_verb(Words{s}, 0).has_value(); });
        dsl::Expr lhs = noun(subj);
        dsl::Expr rhs = noun(ref);
        return emit(dsl::node(dsl::Op::kMovingToward, {std::move(lhs), std::move(rhs)}));
      }
      Words rest;
      for (std::size_t k = 0; k < w.size(); ++k)
        if (k != i) rest.push_back(w[k]);
      return emit(dsl::node(*verb, {noun(rest)}));
    }
    return noun(w);
  }

  dsl::Expr noun(const Words& w) {
    Words content;
    for (const auto& s : w)
      if (!filler_words().contains(s)) content.push_back(s);
    const auto& vocab = vocabulary();
    for (std::size_t i = 0; i + 1 < content.size(); ++i) {
      auto bigram = content[i] + " " + content[i + 1];
      if (vocab.contains(bigram)) return category(bigram);
    }
    for (const auto& s : content) {
      if (vocab.contains(s)) return category(s);
      if (s.size() > 3 && s.back() == 's' && vocab.contains(s.substr(0, s.size() - 1)))
        return category(s.substr(0, s.size() - 1));
    }
    Words specific;
    for (const auto& s : content)
      if (!generic_words().contains(s)) specific.push_back(s);
    if (specific.empty()) return dsl::all();
    semantic = true;
    return emit(dsl::semantic(join(specific, " ")));
  }

  dsl::Expr category(const std::string& label) {
    semantic = true;
    return emit(dsl::category(label));
  }

  /// Registers `e` as a node (deduplicated by program text) and returns an
  /// input reference to it.
  dsl::Expr emit(dsl::Expr e) {
    const std::string src = dsl::print(e);
    for (const auto& [id, text] : programs)
      if (text == src) return dsl::input(id);
    const auto& info = dsl::info(e.op);
    std::string id;
    if (e.op == dsl::Op::kCategory) {
      id = "select_" + e.text;
      std::replace(id.begin(), id.end(), ' ', '_');
    } else {
      id = std::string(info.name) + "_" + std::to_string(++counters_[std::string(info.name)]);
    }
    PlanNode n;
    n.id = id;
    n.kind = NodeKind::kReasoning;
    n.op = std::string(info.name);
    n.params["branch"] = branch(info.group);
    if (e.op == dsl::Op::kCategory) n.params["category"] = e.text;
    if (e.op == dsl::Op::kSemantic) n.params["description"] = e.text;
    for (const auto& ref : dsl::input_refs(e)) n.deps.push_back(ref);
    if (n.deps.empty()) n.deps.push_back("twin");
    programs[id] = src;
    nodes.push_back(std::move(n));
    return dsl::input(id);
  }

 private:
  static std::string branch(dsl::Group g) {
    switch (g) {
      case dsl::Group::kSpatial: return "spatial";
      case dsl::Group::kTemporal: return "temporal";
      case dsl::Group::kSelector: return "spatial";
      default: return "semantic";
    }
  }

  std::map<std::string, int> counters_;
};

}  // namespace rules

/// Deterministic keyword planner used offline and as the chat fallback.
inline ExecutionPlan rule_plan(const std::string& query, const RulePlannerOptions& options = {}) {
  using namespace rules;
  Words words = tokenize_words(query);

  std::optional<int> span;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if ((words[i + 1] == "frames" || words[i + 1] == "frame") &&
        std::all_of(words[i].begin(), words[i].end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      span = std::stoi(words[i]);
      words.erase(words.begin() + static_cast<std::ptrdiff_t>(i), words.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
  }

  Composer c;
  dsl::Expr root;
  auto conn = std::find_if(words.begin(), words.end(), [](const std::string& s) { return connectors().contains(s); });
  if (conn != words.end()) {
    c.temporal = true;
    const dsl::Op op = connectors().at(*conn);
    Words body(words.begin(), conn);
    Words event(conn + 1, words.end());
    dsl::Expr event_expr = c.clause(event);
    dsl::Expr body_expr = c.clause(body);
    root = c.emit(dsl::node(op, {std::move(event_expr), std::move(body_expr)}));
  } else {
    root = c.clause(words);
  }
  if (root.op != dsl::Op::kInput) root = c.emit(root);  // bare (all)

  ExecutionPlan plan;
  plan.query = query;
  plan.models.push_back({Role::kSegmenter, "object masks are required for every output"});
  plan.models.push_back({Role::kEmbedder, "appearance features keep object identity across frames"});
  if (c.semantic) plan.models.push_back({Role::kDetector, "category labels for semantic selection"});
  if (c.spatial) plan.models.push_back({Role::kDepth, "depth ordering for spatial relations"});
  plan.window_size = c.temporal ? std::max(options.default_window, span.value_or(0)) : options.default_window;
  plan.tracking = options.tracking;

  std::vector<std::string> perception_ids;
  for (const auto& m : plan.models) {
    PlanNode p{"perceive_" + role_name(m.role), NodeKind::kPerception, role_name(m.role), {}, {}};
    perception_ids.push_back(p.id);
    plan.nodes.push_back(std::move(p));
  }
  plan.nodes.push_back({"twin", NodeKind::kState, "twin", {{"window_size", std::to_string(plan.window_size)}}, perception_ids});
  for (auto& n : c.nodes) plan.nodes.push_back(std::move(n));
  plan.programs = std::move(c.programs);
  plan.output_node = root.text;
  return plan;
}

/// MS ablation: replace the selected models with every registered role.
inline void disable_model_selection(ExecutionPlan& plan, const ProviderSet& registered = ProviderSet::all()) {
  plan.models.clear();
  std::erase_if(plan.nodes, [](const PlanNode& n) { return n.kind == NodeKind::kPerception; });
  std::vector<std::string> ids;
  std::vector<PlanNode> perception;
  for (Role r : registered.roles()) {
    plan.models.push_back({r, "model selection disabled: all registered roles run"});
    perception.push_back({"perceive_" + role_name(r), NodeKind::kPerception, role_name(r), {}, {}});
    ids.push_back(perception.back().id);
  }
  for (auto& n : plan.nodes)
    if (n.kind == NodeKind::kState) n.deps = ids;
  plan.nodes.insert(plan.nodes.begin(), perception.begin(), perception.end());
}

// ---- provider-facing entry point -----------------------------------------

struct PlannerProvider {
  enum class Kind { kRuleBased, kChatEndpoint } kind = Kind::kRuleBased;
  ChatEndpoint endpoint;

  static PlannerProvider rule_based() { return {}; }
  static PlannerProvider chat(ChatEndpoint ep) { return {Kind::kChatEndpoint, std::move(ep)}; }
};

using WarningSink = std::function<void(const std::string&)>;

/// Plans a query. Chat replies are parsed and validated; an invalid reply gets
/// one repair round-trip, after which the rule planner is used with a warning.
inline ExecutionPlan plan_query(const std::string& query, const PlannerProvider& provider,
                                const RulePlannerOptions& options = {}, const WarningSink& warn = {}) {
  if (query.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kPlanInvalid, "query is empty");
  }
  if (provider.kind == PlannerProvider::Kind::kChatEndpoint) {
    ChatClient client(provider.endpoint);
    std::vector<ChatMessage> messages{{"system", std::string(kPlannerPrompt)}, {"user", query}};
    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const std::string reply = client.complete(messages);
      try {
        auto plan = plan_from_json(nlohmann::json::parse(strip_code_fence(reply)));
        auto reasons = validate_plan(plan);
        if (reasons.empty()) return plan;
        problem = "plan failed validation: " + join(reasons, "; ");
      } catch (const nlohmann::json::exception& e) {
        problem = std::string("reply is not valid JSON: ") + e.what();
      } catch (const Error& e) {
        problem = e.what();
      }
      messages.push_back({"assistant", reply});
      messages.push_back({"user", problem + "\nReply again with only the corrected JSON plan."});
    }
    if (warn) warn("chat planner failed twice (" + problem + "); falling back to the rule planner");
  }
  auto plan = rule_plan(query, options);
  require_valid(plan);
  return plan;
}

}  // namespace jitwin
