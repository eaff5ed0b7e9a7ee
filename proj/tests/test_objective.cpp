#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace ftrv;

namespace {

SolutionSpec two_agents() { return SolutionSpec::coordinated(2, 1); }

ExprPtr random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 8 : 1);
  std::uniform_int_distribution<int> small(0, 9);
  switch (pick(rng)) {
    case 0: return Expr::number(small(rng) * 0.25);
    case 1: return Expr::make_atom(small(rng) % 2 ? AtomKind::ET : AtomKind::VT, small(rng) % 2 ? "A" : "v", small(rng) % 2);
    case 2: return Expr::binary(Expr::Op::add, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 3: return Expr::binary(Expr::Op::sub, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 4: return Expr::binary(Expr::Op::mul, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 5: return Expr::binary(Expr::Op::div, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 6: return Expr::unary(Expr::Op::neg, random_expr(rng, depth - 1));
    case 7: return Expr::unary(Expr::Op::sqrt, random_expr(rng, depth - 1));
    default: return Expr::unary(Expr::Op::pow, random_expr(rng, depth - 1), small(rng) % 2 ? 1.5 : -2.0);
  }
}

}  // namespace

TEST(ObjectiveParse, StandardShape) {
  const auto ast = parse_objective("max{ET(v,0) + 1*sqrt(VT(v,0)) for v in V} + 0.5*max{ET(v,1) for v in V}");
  ASSERT_EQ(ast.summands.size(), 2u);
  EXPECT_EQ(ast.summands[0].weight, 1.0);
  EXPECT_EQ(ast.summands[1].weight, 0.5);
  ASSERT_TRUE(ast.summands[0].binder);
  EXPECT_EQ(ast.summands[0].binder->variable, "v");
  EXPECT_TRUE(ast.summands[0].binder->nodes.all);
}

TEST(ObjectiveParse, ExplicitTermsAndNodeSets) {
  const auto ast = parse_objective("max{ET(A,0), 2*ET(B,0)} + max{VT(x,0) for x in {A,C}}");
  ASSERT_EQ(ast.summands.size(), 2u);
  EXPECT_EQ(ast.summands[0].terms.size(), 2u);
  EXPECT_FALSE(ast.summands[0].binder);
  EXPECT_EQ(ast.summands[1].binder->nodes.names, (std::vector<std::string>{"A", "C"}));
}

TEST(ObjectiveParse, PrecedenceAndAssociativity) {
  const std::vector<double> none;
  auto val = [&](const char* text) { return evaluate(*parse_expr(text), none); };
  EXPECT_DOUBLE_EQ(val("1 + 2 * 3"), 7.0);
  EXPECT_DOUBLE_EQ(val("(1 + 2) * 3"), 9.0);
  EXPECT_DOUBLE_EQ(val("8 - 2 - 1"), 5.0);
  EXPECT_DOUBLE_EQ(val("8 / 2 / 2"), 2.0);
  EXPECT_DOUBLE_EQ(val("-2^2"), -4.0);
  EXPECT_DOUBLE_EQ(val("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(val("pow(4, 0.5)"), 2.0);
  EXPECT_DOUBLE_EQ(val("sqrt(9) + 1e-1"), 3.1);
}

TEST(ObjectiveParse, PrintParseRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    ObjectiveAst ast;
    std::uniform_int_distribution<int> count(1, 3);
    const int summands = count(rng);
    for (int s = 0; s < summands; ++s) {
      Summand sm;
      sm.weight = s == 0 ? 1.0 : 0.25 * count(rng);
      if (rng() % 2) {
        sm.terms.push_back(random_expr(rng, 3));
        sm.binder = Binder{"v", rng() % 2 ? NodeSet{true, {}} : NodeSet{false, {"A", "B"}}};
      } else {
        for (int t = 0; t < count(rng); ++t) sm.terms.push_back(random_expr(rng, 3));
      }
      ast.summands.push_back(std::move(sm));
    }
    const auto text = to_string(ast);
    const auto back = parse_objective(text);
    EXPECT_EQ(back, ast) << text;
    EXPECT_EQ(to_string(back), text);
  }
}

TEST(ObjectiveParse, Errors) {
  for (const char* bad : {"", "max{}", "max{ET(A,0)", "ET(A,0)", "max{ET(A,-1)}", "max{ET(A,0.5)}",
                          "max{foo(A)}", "max{ET(A,0) for v in}", "0*max{ET(A,0)}", "max{ET(A,0)} +",
                          "max{ET(A,0)} max{ET(B,0)}", "max{ET(A,0) $ 1}", "max{1 +}", "max{pow(ET(A,0))}"}) {
    EXPECT_THROW(parse_objective(bad), ParseError) << bad;
  }
  try {
    parse_objective("max{ET(A,0) + }");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), 15u);
  }
}

TEST(ObjectiveCompile, ExpandsAndDeduplicates) {
  const auto env = support::p5();
  const auto obj = compile(parse_objective("max{ET(v,0) for v in V} + 0.1*max{ET(v,0) + VT(v,1) for v in {A,E}}"), env,
                           two_agents());
  ASSERT_EQ(obj.summands.size(), 2u);
  EXPECT_EQ(obj.summands[0].terms.size(), 5u);
  EXPECT_EQ(obj.summands[1].terms.size(), 2u);
  // ET(A..E,0) then VT(A,1), VT(E,1)
  ASSERT_EQ(obj.atoms.size(), 7u);
  EXPECT_EQ(atom_label(obj.atoms[5], env), "VT(A,1)");
  EXPECT_EQ(obj.summands[1].terms[1].fault_levels, (std::vector<int>{0, 1}));
  EXPECT_EQ(obj.summands[1].terms[0].label, "ET(A,0) + VT(A,1)");
}

TEST(ObjectiveCompile, Validation) {
  const auto env = support::p5();
  EXPECT_THROW(compile(parse_objective("max{ET(Z,0)}"), env, two_agents()), ValidationError);
  EXPECT_THROW(compile(parse_objective("max{ET(v,0) for v in {A,Z}}"), env, two_agents()), ValidationError);
  EXPECT_THROW(compile(parse_objective("max{ET(A,2)}"), env, two_agents()), ValidationError);
  EXPECT_THROW(compile(parse_objective("max{ET(A,1)}"), env, SolutionSpec::coordinated(1, 1)), ValidationError);
  EXPECT_NO_THROW(compile(parse_objective("max{ET(A,1)}"), env, two_agents()));
}

TEST(ObjectiveEval, BackpropMatchesDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.5, 4.0);
  const auto env = support::p5();
  const char* terms[] = {"ET(A,0) * VT(B,0) + 3", "sqrt(VT(A,0)) / ET(B,0)", "pow(ET(A,0) + VT(B,0), 1.7) - ET(B,0)",
                         "-ET(A,0)^-2 * (VT(B,0) - 1)"};
  for (const char* t : terms) {
    const auto obj = compile(parse_objective(std::string("max{") + t + "}"), env, two_agents());
    const auto& e = *obj.summands[0].terms[0].expr;
    std::vector<double> x(obj.atoms.size());
    for (auto& v : x) v = pos(rng);
    std::vector<double> g(x.size(), 0.0);
    backprop(e, x, 1.0, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto hi = x;
      auto lo = x;
      hi[i] += 1e-6;
      lo[i] -= 1e-6;
      EXPECT_NEAR(g[i], (evaluate(e, hi) - evaluate(e, lo)) / 2e-6, 1e-6) << t;
    }
  }
}

TEST(ObjectiveEval, DivisionByZeroIsNumerical) {
  const std::vector<double> none;
  EXPECT_THROW(evaluate(*parse_expr("1 / (2 - 2)"), none), NumericalError);
}

TEST(ObjectiveEncodings, StandardTemplate) {
  EXPECT_EQ(standard_objective(0, 0), "max{ET(v,0) for v in V}");
  EXPECT_EQ(standard_objective(1, 0.5, {"A", "C"}),
            "max{ET(v,0) + 1*sqrt(VT(v,0)) for v in {A,C}} + 0.5*max{ET(v,1) + 1*sqrt(VT(v,1)) for v in {A,C}}");
  EXPECT_NO_THROW(parse_objective(standard_objective(0.1, 0.2)));
  const auto idle = encode_idleness(0.25);
  EXPECT_EQ(to_string(idle), "max{ET(v,0) for v in V} + 0.25*max{VT(v,0) for v in V}");
  const auto patrol = encode_patrolling({{"A", 2.0}, {"B", 1.0}});
  EXPECT_EQ(to_string(patrol), "max{2*(ET(A,0) + 1), 1*(ET(B,0) + 1)}");
  EXPECT_THROW(encode_patrolling({}), ValidationError);
  EXPECT_THROW(encode_idleness(0.0), ValidationError);
}
