#include "doctest.h"

#include "mesopt/milp.hpp"
#include "mesopt/simplex.hpp"
#include "support/convert.hpp"
#include "support/lp_reader.hpp"

using namespace mesopt;

TEST_CASE("add_variable assigns sequential ids") {
  MilpProblem p;
  auto pv = p.add_variable("p_pv", 0, 10, false);
  CHECK(pv.index == 0);
  auto u = p.add_variable("u_on", 0, 1, true);
  CHECK(u.index == 1);
  CHECK(p.variable(u).integral);
  CHECK(p.find_variable("p_pv") == pv);
  CHECK_FALSE(p.find_variable("nope").has_value());
}

TEST_CASE("add_variable rejects duplicates and inverted bounds") {
  MilpProblem p;
  p.add_variable("p_pv", 0, 10, false);
  try {
    p.add_variable("p_pv", 0, 1, false);
    FAIL("expected DuplicateName");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateName);
  }
  try {
    p.add_variable("y", 2, 1, false);
    FAIL("expected InvalidBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidBounds);
  }
  // Infinite bounds never conflict.
  CHECK_NOTHROW(p.add_variable("z", -kInf, kInf, false));
}

TEST_CASE("add_constraint folds constants and drops zeros") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  auto y = p.add_variable("y", 0, kInf);

  LinearExpression e1(x, 1.0);
  e1.add_constant(2.0);
  p.add_constraint("c1", e1, Relation::LessEqual, 5.0);
  const auto& c1 = p.constraints()[0];
  CHECK(c1.rhs == doctest::Approx(3.0));
  CHECK(c1.expr.constant() == 0.0);
  CHECK(c1.expr.terms().size() == 1);

  LinearExpression e2;
  e2.add(x, 1.0).add(y, 0.0);
  p.add_constraint("c2", e2, Relation::Equal, 4.0);
  const auto& c2 = p.constraints()[1];
  CHECK(c2.expr.terms().size() == 1);
  CHECK(c2.expr.coefficient(x) == 1.0);
  CHECK(c2.rhs == 4.0);

  // Terms that cancel are dropped as well.
  LinearExpression e3;
  e3.add(y, 2.0).add(y, -2.0).add(x, 1.0);
  CHECK(e3.terms().size() == 1);
}

TEST_CASE("add_constraint rejects undeclared variables") {
  MilpProblem p;
  p.add_variable("x", 0, 1);
  LinearExpression e(VariableId{7}, 1.0);
  try {
    p.add_constraint("bad", e, Relation::LessEqual, 1.0);
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariable);
  }
  CHECK(p.num_constraints() == 0);
}

TEST_CASE("LP export of an empty problem") {
  MilpProblem p;
  std::string text = export_lp_text(p);
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("obj: 0") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_CASE("LP export transcribes bounds and integer sections") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 5);
  p.set_objective(LinearExpression(x, 1.0), Sense::Minimize);
  std::string text = export_lp_text(p);
  CHECK(text.find("0 <= x <= 5") != std::string::npos);

  auto b = p.add_variable("b", 0, 1, true);
  auto n = p.add_variable("n", 0, 9, true);
  auto f = p.add_variable("f", -kInf, kInf);
  LinearExpression row;
  row.add(x, 1.0).add(b, -2.5).add(n, 1.0).add(f, 1.0);
  p.add_constraint("link", row, Relation::GreaterEqual, -1.0);
  text = export_lp_text(p);
  CHECK(text.find("Binaries\n b\n") != std::string::npos);
  CHECK(text.find("Generals\n n\n") != std::string::npos);
  CHECK(text.find(" f free") != std::string::npos);
  CHECK(text.find("link: x - 2.5 b + n + f >= -1") != std::string::npos);
}

TEST_CASE("LP export writes at least 12 significant digits") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1.0 / 3.0);
  p.set_objective(LinearExpression(x, 2.0 / 3.0), Sense::Maximize);
  std::string text = export_lp_text(p);
  CHECK(text.find("0.333333333333333") != std::string::npos);
  CHECK(text.find("0.666666666666667 x") != std::string::npos);
}

TEST_CASE("building the same model twice exports identical text") {
  auto build = [] {
    MilpProblem p;
    auto a = p.add_variable("a", 0, 4);
    auto b = p.add_variable("b", -1, 3, true);
    p.add_constraint("r", LinearExpression(a, 1.0) + LinearExpression(b, 2.0), Relation::LessEqual, 5);
    p.set_objective(LinearExpression(a, -1.0) + LinearExpression(b, -1.0), Sense::Minimize);
    return export_lp_text(p);
  };
  CHECK(build() == build());
}

TEST_CASE("LP export round trip preserves the optimum") {
  std::mt19937 rng(7);
  for (int k = 0; k < 30; ++k) {
    auto lp = oracle::random_lp(rng, 5, 5);
    auto original = oracle::to_problem(lp);
    auto reread = lp_reader::read(export_lp_text(original));
    auto a = solve_lp(original);
    auto b = solve_lp(reread);
    REQUIRE(a.status == b.status);
    if (a.status == SolveStatus::Optimal) CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
    // Re-export of the parsed problem is stable.
    CHECK(export_lp_text(reread) == export_lp_text(lp_reader::read(export_lp_text(reread))));
  }
}
