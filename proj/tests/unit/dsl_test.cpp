#include <gtest/gtest.h>

#include <random>

#include "jitwin/dsl.hpp"
#include "support/oracles.hpp"

using namespace jitwin;
using namespace jitwin::dsl;

namespace {

Error parse_error(std::string_view src) {
  try {
    parse_program_any(src);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "parsed: " << src;
  return Error(ErrorCode::kIoError, "");
}

}  // namespace

TEST(ParseProgram, CategoryFilter) {
  EXPECT_EQ(parse_program("(category \"cup\")").root, category("cup"));
}

TEST(ParseProgram, SpatialWithSelectorChild) {
  const auto p = parse_program("(behind (category \"box\") (largest (all)))");
  EXPECT_EQ(p.root, node(Op::kBehind, {category("box"), node(Op::kLargest, {all()})}));
  EXPECT_EQ(info(p.root.args[1].op).group, Group::kSelector);
}

TEST(ParseProgram, ArityError) {
  const auto e = parse_error("(behind (category \"a\"))");
  EXPECT_EQ(e.code(), ErrorCode::kArityError);
  EXPECT_NE(std::string(e.what()).find("behind"), std::string::npos);
}

TEST(ParseProgram, SyntaxErrorsCarryByteOffset) {
  EXPECT_EQ(parse_error("(category \"cup\"").code(), ErrorCode::kSyntaxError);
  const auto e = parse_error("(and (all) ))");
  EXPECT_EQ(e.code(), ErrorCode::kSyntaxError);
  EXPECT_NE(std::string(e.what()).find("at byte 12"), std::string::npos);
  EXPECT_EQ(parse_error("").code(), ErrorCode::kSyntaxError);
  EXPECT_EQ(parse_error("(category cup)").code(), ErrorCode::kSyntaxError);
  EXPECT_EQ(parse_error("(attr colour < 3)").code(), ErrorCode::kSyntaxError);
  EXPECT_EQ(parse_error("(attr area ~ 3)").code(), ErrorCode::kSyntaxError);
}

TEST(ParseProgram, UnknownPredicateListsInventory) {
  const auto e = parse_error("(teleported (all))");
  EXPECT_EQ(e.code(), ErrorCode::kUnknownPredicate);
  const std::string msg = e.what();
  for (const auto& op : kOps) EXPECT_NE(msg.find(std::string(op.name)), std::string::npos) << op.name;
}

TEST(ParseProgram, WhitespaceAndCommentsIgnored) {
  const auto a = parse_program("(and (category \"cup\")\n   ; a comment\n  (moved (all) 4))");
  EXPECT_EQ(print(a), "(and (category \"cup\") (moved (all) 4))");
}

TEST(ParseProgram, AttrAndEscapes) {
  const auto p = parse_program(R"((and (attr depth >= 2.5) (semantic "a \"red\" cup")))");
  EXPECT_EQ(p.root.args[0], attr("depth", ">=", 2.5));
  EXPECT_EQ(p.root.args[1].text, "a \"red\" cup");
}

TEST(JsonAst, EquivalentToSexpr) {
  const std::string src = "(behind (category \"box\") (moved (input \"n1\") 3))";
  const auto json = to_json_ast(parse_program(src).root).dump();
  EXPECT_EQ(parse_program_any(json), parse_program(src));
  EXPECT_EQ(parse_error(R"({"op": "category"})").code(), ErrorCode::kSyntaxError);
  EXPECT_EQ(parse_error(R"({"op": "nope"})").code(), ErrorCode::kUnknownPredicate);
}

TEST(RequiredRoles, ByOperator) {
  auto roles = [](std::string_view s) { return required_roles(parse_program(s).root); };
  EXPECT_EQ(roles("(all)"), (std::set<Role>{Role::kSegmenter}));
  EXPECT_EQ(roles("(category \"cup\")"), (std::set<Role>{Role::kSegmenter, Role::kDetector}));
  EXPECT_EQ(roles("(behind (all) (all))"), (std::set<Role>{Role::kSegmenter, Role::kDepth}));
  EXPECT_EQ(roles("(left_of (all) (all))"), (std::set<Role>{Role::kSegmenter}));
  EXPECT_EQ(roles("(moved (all))"), (std::set<Role>{Role::kSegmenter, Role::kEmbedder}));
  EXPECT_EQ(roles("(attr depth > 1)"), (std::set<Role>{Role::kSegmenter, Role::kDepth}));
}

TEST(InputRefs, Collected) {
  EXPECT_EQ(input_refs(parse_program("(or (input \"a\") (not (input \"b\")) (input \"a\"))").root),
            (std::set<std::string>{"a", "b"}));
}

TEST(DslProperty, PrintParseRoundTrip) {
  std::mt19937 rng(31);
  for (int i = 0; i < 1000; ++i) {
    const Expr e = oracle::random_expr(rng, 5);
    const std::string text = print(e);
    ASSERT_EQ(parse_program(text).root, e) << text;
    ASSERT_EQ(print(parse_program(text)), text);
    ASSERT_EQ(parse_program_any(to_json_ast(e).dump()).root, e) << text;
  }
}
