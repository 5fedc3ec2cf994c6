#pragma once

// Predicate programs: a small S-expression language over object sets.
//
//   expr := "(" head arg* ")"
//   arg  := expr | string | number | symbol
//
// Every expression evaluates to a set of track ids at the current frame.
// See docs/dsl.md for the full inventory.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "jitwin/error.hpp"
#include "jitwin/perception.hpp"
#include "jitwin/text.hpp"

namespace jitwin::dsl {

enum class Op {
  kAll,
  kCategory,
  kAttr,
  kBehind,
  kInFrontOf,
  kAbove,
  kBelow,
  kLeftOf,
  kRightOf,
  kNear,
  kOverlaps,
  kMoved,
  kEntered,
  kExited,
  kMovingToward,
  kAfter,
  kBefore,
  kAnd,
  kOr,
  kNot,
  kLargest,
  kSmallest,
  kClosestTo,
  kFarthestFrom,
  kSemantic,
  kInput,
};

enum class Group { kSet, kCategoryFilter, kAttrFilter, kSpatial, kTemporal, kSetOp, kSelector, kSemantic, kInput };

/// Argument shape of an operator.
enum class Shape {
  kNone,         // (all)
  kString,       // (category "cup")
  kAttr,         // (attr key cmp number)
  kSets,         // (op set set ...)
  kSetOptNumber, // (moved set [span])
};

struct OpInfo {
  Op op;
  std::string_view name;
  Group group;
  Shape shape;
  int min_sets;
  int max_sets;  // -1 = unbounded
};

inline constexpr OpInfo kOps[] = {
    {Op::kAll, "all", Group::kSet, Shape::kNone, 0, 0},
    {Op::kCategory, "category", Group::kCategoryFilter, Shape::kString, 0, 0},
    {Op::kAttr, "attr", Group::kAttrFilter, Shape::kAttr, 0, 0},
    {Op::kBehind, "behind", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kInFrontOf, "in_front_of", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kAbove, "above", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kBelow, "below", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kLeftOf, "left_of", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kRightOf, "right_of", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kNear, "near", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kOverlaps, "overlaps", Group::kSpatial, Shape::kSets, 2, 2},
    {Op::kMoved, "moved", Group::kTemporal, Shape::kSetOptNumber, 1, 1},
    {Op::kEntered, "entered", Group::kTemporal, Shape::kSets, 1, 1},
    {Op::kExited, "exited", Group::kTemporal, Shape::kSets, 1, 1},
    {Op::kMovingToward, "moving_toward", Group::kTemporal, Shape::kSets, 2, 2},
    {Op::kAfter, "after", Group::kTemporal, Shape::kSets, 2, 2},
    {Op::kBefore, "before", Group::kTemporal, Shape::kSets, 2, 2},
    {Op::kAnd, "and", Group::kSetOp, Shape::kSets, 1, -1},
    {Op::kOr, "or", Group::kSetOp, Shape::kSets, 1, -1},
    {Op::kNot, "not", Group::kSetOp, Shape::kSets, 1, 1},
    {Op::kLargest, "largest", Group::kSelector, Shape::kSets, 1, 1},
    {Op::kSmallest, "smallest", Group::kSelector, Shape::kSets, 1, 1},
    {Op::kClosestTo, "closest_to", Group::kSelector, Shape::kSets, 2, 2},
    {Op::kFarthestFrom, "farthest_from", Group::kSelector, Shape::kSets, 2, 2},
    {Op::kSemantic, "semantic", Group::kSemantic, Shape::kString, 0, 0},
    {Op::kInput, "input", Group::kInput, Shape::kString, 0, 0},
};

inline const OpInfo& info(Op op) {
  for (const auto& i : kOps)
    if (i.op == op) return i;
  return kOps[0];
}

inline const OpInfo* lookup(std::string_view name) {
  for (const auto& i : kOps)
    if (i.name == name) return &i;
  return nullptr;
}

inline std::string inventory() {
  std::vector<std::string> names;
  for (const auto& i : kOps) names.emplace_back(i.name);
  return join(names, ", ");
}

inline constexpr std::string_view kAttrKeys[] = {"area", "depth", "x", "y", "vx", "vy", "speed", "age", "width", "height"};
inline constexpr std::string_view kComparators[] = {"<", "<=", ">", ">=", "=", "!="};

struct Expr {
  Op op = Op::kAll;
  std::string text;               // category label, semantic text, input node id, attr key
  std::string cmp;                // attr comparator
  std::optional<double> number;   // attr value, moved span
  std::vector<Expr> args;

  bool operator==(const Expr&) const = default;
};

struct PredicateProgram {
  Expr root;
  bool operator==(const PredicateProgram&) const = default;
};

// ---- construction helpers -------------------------------------------------

inline Expr all() { return {Op::kAll, {}, {}, {}, {}}; }
inline Expr category(std::string label) { return {Op::kCategory, std::move(label), {}, {}, {}}; }
inline Expr semantic(std::string text) { return {Op::kSemantic, std::move(text), {}, {}, {}}; }
inline Expr input(std::string node) { return {Op::kInput, std::move(node), {}, {}, {}}; }
inline Expr attr(std::string key, std::string cmp, double value) {
  return {Op::kAttr, std::move(key), std::move(cmp), value, {}};
}
inline Expr node(Op op, std::vector<Expr> args, std::optional<double> number = std::nullopt) {
  return {op, {}, {}, number, std::move(args)};
}

// ---- printing -------------------------------------------------------------

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string print(const Expr& e) {
  const auto& i = info(e.op);
  std::string out = "(" + std::string(i.name);
  switch (i.shape) {
    case Shape::kNone: break;
    case Shape::kString: out += " " + quote(e.text); break;
    case Shape::kAttr: out += " " + e.text + " " + e.cmp + " " + shortest_number(e.number.value_or(0.0)); break;
    case Shape::kSets:
    case Shape::kSetOptNumber:
      for (const auto& a : e.args) out += " " + print(a);
      if (i.shape == Shape::kSetOptNumber && e.number) out += " " + shortest_number(*e.number);
      break;
  }
  return out + ")";
}

inline std::string print(const PredicateProgram& p) { return print(p.root); }

// ---- parsing --------------------------------------------------------------

namespace detail {

struct Datum;
using DatumList = std::vector<Datum>;

struct Datum {
  enum class Kind { kExpr, kString, kNumber, kSymbol } kind;
  std::size_t offset;
  std::string text;
  double number = 0.0;
  Expr expr;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse_root() {
    skip_ws();
    if (pos_ >= src_.size()) fail(pos_, "empty program");
    Datum d = parse_datum();
    if (d.kind != Datum::Kind::kExpr) fail(d.offset, "program must be a parenthesized expression");
    skip_ws();
    if (pos_ < src_.size()) fail(pos_, "unexpected trailing input");
    return std::move(d.expr);
  }

 private:
  [[noreturn]] static void fail(std::size_t offset, const std::string& msg) {
    throw Error(ErrorCode::kSyntaxError, "at byte " + std::to_string(offset) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
      } else if (src_[pos_] == ';') {  // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  static bool is_symbol_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '<' || c == '>' || c == '=' ||
           c == '!' || c == '-' || c == '+' || c == '.';
  }

  Datum parse_datum() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ >= src_.size()) fail(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') return parse_list();
    if (c == ')') fail(pos_, "unexpected ')'");
    if (c == '"') {
      ++pos_;
      std::string text;
      while (true) {
        if (pos_ >= src_.size()) fail(start, "unterminated string");
        char ch = src_[pos_++];
        if (ch == '"') break;
        if (ch == '\\') {
          if (pos_ >= src_.size()) fail(start, "unterminated string");
          ch = src_[pos_++];
        }
        text.push_back(ch);
      }
      return {Datum::Kind::kString, start, std::move(text), 0.0, {}};
    }
    while (pos_ < src_.size() && is_symbol_char(src_[pos_])) ++pos_;
    if (pos_ == start) fail(start, std::string("unexpected character '") + c + "'");
    std::string tok(src_.substr(start, pos_ - start));
    double value = 0.0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec == std::errc() && end == tok.data() + tok.size()) {
      return {Datum::Kind::kNumber, start, tok, value, {}};
    }
    return {Datum::Kind::kSymbol, start, tok, 0.0, {}};
  }

  Datum parse_list() {
    const std::size_t start = pos_;
    ++pos_;  // '('
    skip_ws();
    if (pos_ >= src_.size()) fail(start, "unterminated list");
    const std::size_t head_at = pos_;
    Datum head = parse_datum();
    if (head.kind != Datum::Kind::kSymbol) fail(head_at, "expected an operator name");
    const OpInfo* op = lookup(head.text);
    if (!op) {
      throw Error(ErrorCode::kUnknownPredicate,
                  "at byte " + std::to_string(head_at) + ": '" + head.text + "' (supported: " + inventory() + ")");
    }
    DatumList args;
    while (true) {
      skip_ws();
      if (pos_ >= src_.size()) fail(start, "unterminated list");
      if (src_[pos_] == ')') {
        ++pos_;
        break;
      }
      args.push_back(parse_datum());
    }
    return {Datum::Kind::kExpr, start, {}, 0.0, build(*op, head_at, std::move(args))};
  }

  [[noreturn]] static void arity(const OpInfo& op, std::size_t at, const std::string& expected, std::size_t got) {
    throw Error(ErrorCode::kArityError, "at byte " + std::to_string(at) + ": '" + std::string(op.name) +
                                            "' expects " + expected + ", got " + std::to_string(got) + " argument" +
                                            (got == 1 ? "" : "s"));
  }

  static Expr build(const OpInfo& op, std::size_t at, DatumList args) {
    Expr e;
    e.op = op.op;
    switch (op.shape) {
      case Shape::kNone:
        if (!args.empty()) arity(op, at, "no arguments", args.size());
        break;
      case Shape::kString:
        if (args.size() != 1) arity(op, at, "1 string", args.size());
        if (args[0].kind != Datum::Kind::kString) fail(args[0].offset, "expected a string literal");
        e.text = std::move(args[0].text);
        break;
      case Shape::kAttr: {
        if (args.size() != 3) arity(op, at, "key, comparator and number", args.size());
        if (args[0].kind != Datum::Kind::kSymbol ||
            std::find(std::begin(kAttrKeys), std::end(kAttrKeys), args[0].text) == std::end(kAttrKeys)) {
          fail(args[0].offset, "unknown attribute key");
        }
        if (args[1].kind != Datum::Kind::kSymbol ||
            std::find(std::begin(kComparators), std::end(kComparators), args[1].text) == std::end(kComparators)) {
          fail(args[1].offset, "unknown comparator");
        }
        if (args[2].kind != Datum::Kind::kNumber) fail(args[2].offset, "expected a number");
        e.text = args[0].text;
        e.cmp = args[1].text;
        e.number = args[2].number;
        break;
      }
      case Shape::kSets:
      case Shape::kSetOptNumber: {
        if (op.shape == Shape::kSetOptNumber && !args.empty() && args.back().kind == Datum::Kind::kNumber) {
          e.number = args.back().number;
          args.pop_back();
        }
        const auto n = static_cast<int>(args.size());
        if (n < op.min_sets || (op.max_sets >= 0 && n > op.max_sets)) {
          std::string expected = op.max_sets < 0 ? "at least " + std::to_string(op.min_sets)
                                 : op.min_sets == op.max_sets ? std::to_string(op.min_sets)
                                                              : std::to_string(op.min_sets) + "-" +
                                                                    std::to_string(op.max_sets);
          arity(op, at, expected + " set expression" + (op.max_sets == 1 ? "" : "s"), args.size());
        }
        for (auto& a : args) {
          if (a.kind != Datum::Kind::kExpr) fail(a.offset, "expected a set expression");
          e.args.push_back(std::move(a.expr));
        }
        break;
      }
    }
    return e;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline PredicateProgram parse_program(std::string_view src) { return {detail::Parser(src).parse_root()}; }

// ---- JSON AST form --------------------------------------------------------

inline nlohmann::json to_json_ast(const Expr& e) {
  const auto& i = info(e.op);
  nlohmann::json j{{"op", i.name}};
  switch (i.shape) {
    case Shape::kNone: break;
    case Shape::kString:
      j[e.op == Op::kCategory ? "label" : e.op == Op::kInput ? "node" : "text"] = e.text;
      break;
    case Shape::kAttr:
      j["key"] = e.text;
      j["cmp"] = e.cmp;
      j["value"] = e.number.value_or(0.0);
      break;
    case Shape::kSets:
    case Shape::kSetOptNumber: {
      nlohmann::json args = nlohmann::json::array();
      for (const auto& a : e.args) args.push_back(to_json_ast(a));
      j["args"] = std::move(args);
      if (e.number) j["span"] = *e.number;
      break;
    }
  }
  return j;
}

/// Converts the JSON AST to S-expression text so both encodings share one
/// validation path.
inline std::string json_ast_to_source(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) {
    throw Error(ErrorCode::kSyntaxError, "JSON AST node needs a string \"op\"");
  }
  const std::string name = j["op"].get<std::string>();
  const OpInfo* op = lookup(name);
  if (!op) throw Error(ErrorCode::kUnknownPredicate, "'" + name + "' (supported: " + inventory() + ")");
  std::string out = "(" + name;
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw Error(ErrorCode::kSyntaxError, "'" + name + "' needs string field \"" + key + "\"");
    }
    return j[key].get<std::string>();
  };
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorCode::kSyntaxError, "'" + name + "' needs numeric field \"" + key + "\"");
    }
    return shortest_number(j[key].get<double>());
  };
  switch (op->shape) {
    case Shape::kNone: break;
    case Shape::kString:
      out += " " + quote(str(op->op == Op::kCategory ? "label" : op->op == Op::kInput ? "node" : "text"));
      break;
    case Shape::kAttr: out += " " + str("key") + " " + str("cmp") + " " + num("value"); break;
    case Shape::kSets:
    case Shape::kSetOptNumber:
      if (j.contains("args")) {
        if (!j["args"].is_array()) throw Error(ErrorCode::kSyntaxError, "\"args\" must be an array");
        for (const auto& a : j["args"]) out += " " + json_ast_to_source(a);
      }
      if (j.contains("span")) out += " " + num("span");
      break;
  }
  return out + ")";
}

/// Accepts either S-expression source or a JSON AST (text starting with '{').
inline PredicateProgram parse_program_any(std::string_view src) {
  auto first = src.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && src[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(src);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kSyntaxError, std::string("JSON AST: ") + e.what());
    }
    return parse_program(json_ast_to_source(j));
  }
  return parse_program(src);
}

// ---- static analysis ------------------------------------------------------

inline void collect_inputs(const Expr& e, std::set<std::string>& out) {
  if (e.op == Op::kInput) out.insert(e.text);
  for (const auto& a : e.args) collect_inputs(a, out);
}

inline std::set<std::string> input_refs(const Expr& e) {
  std::set<std::string> out;
  collect_inputs(e, out);
  return out;
}

/// Perception roles an expression needs, excluding those of referenced inputs.
inline std::set<Role> required_roles(const Expr& e) {
  std::set<Role> roles{Role::kSegmenter};
  const auto& i = info(e.op);
  if (i.group == Group::kCategoryFilter || i.group == Group::kSemantic) roles.insert(Role::kDetector);
  if (e.op == Op::kBehind || e.op == Op::kInFrontOf) roles.insert(Role::kDepth);
  if (e.op == Op::kAttr && e.text == "depth") roles.insert(Role::kDepth);
  if (i.group == Group::kTemporal) roles.insert(Role::kEmbedder);
  for (const auto& a : e.args) {
    auto sub = required_roles(a);
    roles.insert(sub.begin(), sub.end());
  }
  return roles;
}

inline bool uses_group(const Expr& e, Group g) {
  if (info(e.op).group == g) return true;
  return std::any_of(e.args.begin(), e.args.end(), [g](const Expr& a) { return uses_group(a, g); });
}

}  // namespace jitwin::dsl
