#include "doctest.h"

#include <random>

#include "mesopt/simplex.hpp"
#include "support/convert.hpp"
#include "support/oracles.hpp"

using namespace mesopt;

TEST_CASE("solve_lp: bound-attaining minimum") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  p.set_objective(LinearExpression(x), Sense::Minimize);
  auto s = solve_lp(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.values[0] == 0.0);
  CHECK(s.objective == 0.0);
}

TEST_CASE("solve_lp: two-variable maximization matches vertex enumeration") {
  oracle::DenseLp lp;
  lp.c = {3, 2};
  lp.a = {{1, 1}, {1, 0}};
  lp.rel = {oracle::DenseLp::Le, oracle::DenseLp::Le};
  lp.b = {4, 2};
  lp.lo = {0, 0};
  lp.hi = {10, 10};  // loose; the rows bind first
  lp.maximize = true;
  std::vector<double> arg;
  auto expected = oracle::vertex_enumeration(lp, &arg);
  REQUIRE(expected.has_value());
  CHECK(*expected == doctest::Approx(10.0));

  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  auto y = p.add_variable("y", 0, kInf);
  p.add_constraint("cap", LinearExpression(x) + LinearExpression(y), Relation::LessEqual, 4);
  p.add_constraint("xmax", LinearExpression(x), Relation::LessEqual, 2);
  p.set_objective(3.0 * LinearExpression(x) + 2.0 * LinearExpression(y), Sense::Maximize);
  auto s = solve_lp(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.objective == doctest::Approx(*expected).epsilon(1e-12));
  CHECK(s.values[0] == doctest::Approx(2.0));
  CHECK(s.values[1] == doctest::Approx(2.0));
}

TEST_CASE("solve_lp: contradictory rows are infeasible") {
  MilpProblem p;
  auto x = p.add_variable("x", -kInf, kInf);
  p.add_constraint("lo", LinearExpression(x), Relation::GreaterEqual, 1);
  p.add_constraint("hi", LinearExpression(x), Relation::LessEqual, 0);
  p.set_objective(LinearExpression(x), Sense::Minimize);
  CHECK(solve_lp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("solve_lp: unbounded ray") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  p.set_objective(LinearExpression(x), Sense::Maximize);
  CHECK(solve_lp(p).status == SolveStatus::Unbounded);

  // Unbounded through a row as well.
  MilpProblem q;
  auto a = q.add_variable("a", 0, kInf);
  auto b = q.add_variable("b", 0, kInf);
  q.add_constraint("r", LinearExpression(a) - LinearExpression(b), Relation::LessEqual, 1);
  q.set_objective(LinearExpression(a), Sense::Maximize);
  CHECK(solve_lp(q).status == SolveStatus::Unbounded);
}

TEST_CASE("solve_lp: free variables and equality rows") {
  MilpProblem p;
  auto x = p.add_variable("x", -kInf, kInf);
  auto y = p.add_variable("y", -kInf, kInf);
  p.add_constraint("sum", LinearExpression(x) + LinearExpression(y), Relation::Equal, 1);
  p.add_constraint("diff", LinearExpression(x) - LinearExpression(y), Relation::Equal, 3);
  p.set_objective(LinearExpression(x), Sense::Minimize);
  auto s = solve_lp(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.values[0] == doctest::Approx(2.0));
  CHECK(s.values[1] == doctest::Approx(-1.0));
}

TEST_CASE("solve_lp: objective constant is reported") {
  MilpProblem p;
  auto x = p.add_variable("x", 1, 2);
  LinearExpression obj(x, 1.0);
  obj.add_constant(10.0);
  p.set_objective(obj, Sense::Minimize);
  auto s = solve_lp(p);
  CHECK(s.objective == doctest::Approx(11.0));
}

TEST_CASE("solve_lp property: random LPs agree with vertex enumeration") {
  std::mt19937 rng(20240601);
  for (int k = 0; k < 60; ++k) {
    auto lp = oracle::random_lp(rng, 6, 6);
    auto expected = oracle::vertex_enumeration(lp);
    auto problem = oracle::to_problem(lp);
    auto s = solve_lp(problem);
    if (!expected) {
      CHECK(s.status == SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(std::abs(s.objective - *expected) <= 1e-6);
    CHECK(problem.max_violation(s.values) <= 1e-7);
    for (std::size_t j = 0; j < s.values.size(); ++j) {
      CHECK(s.values[j] >= lp.lo[j] - 1e-9);
      CHECK(s.values[j] <= lp.hi[j] + 1e-9);
    }
  }
}

TEST_CASE("solve_lp handles a degenerate assignment LP") {
  // Highly degenerate: every vertex of the assignment polytope is degenerate.
  const int n = 6;
  MilpProblem p;
  std::vector<VariableId> x;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x.push_back(p.add_variable("x" + std::to_string(i) + "_" + std::to_string(j), 0, kInf));
  for (int i = 0; i < n; ++i) {
    LinearExpression row, col;
    for (int j = 0; j < n; ++j) {
      row.add(x[i * n + j], 1.0);
      col.add(x[j * n + i], 1.0);
    }
    p.add_constraint("row" + std::to_string(i), row, Relation::Equal, 1);
    p.add_constraint("col" + std::to_string(i), col, Relation::Equal, 1);
  }
  LinearExpression obj;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) obj.add(x[i * n + j], ((i * 7 + j * 3) % 5) + 1);
  p.set_objective(obj, Sense::Minimize);
  auto s = solve_lp(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  // Each row has cost pattern containing 1, so the optimum is n.
  CHECK(s.objective == doctest::Approx(n));
}

TEST_CASE("solve_milp: binary tie-break picks the floor branch and lowest id") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1, true);
  auto y = p.add_variable("y", 0, 1, true);
  p.add_constraint("cap", 2.0 * LinearExpression(x) + 2.0 * LinearExpression(y), Relation::LessEqual, 3);
  p.set_objective(LinearExpression(x) + LinearExpression(y), Sense::Maximize);

  // Oracle: all four assignments.
  double best = -1;
  for (int a = 0; a <= 1; ++a)
    for (int b = 0; b <= 1; ++b)
      if (2 * a + 2 * b <= 3) best = std::max(best, double(a + b));
  CHECK(best == 1.0);

  auto s = solve_milp(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.objective == doctest::Approx(best));
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[1] == 0.0);
}

TEST_CASE("solve_milp without integers equals solve_lp") {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  auto y = p.add_variable("y", 0, kInf);
  p.add_constraint("cap", LinearExpression(x) + LinearExpression(y), Relation::LessEqual, 4);
  p.add_constraint("xmax", LinearExpression(x), Relation::LessEqual, 2);
  p.set_objective(3.0 * LinearExpression(x) + 2.0 * LinearExpression(y), Sense::Maximize);
  auto lp = solve_lp(p);
  auto milp = solve_milp(p);
  CHECK(milp.status == SolveStatus::Optimal);
  CHECK(milp.objective == lp.objective);
  CHECK(milp.values == lp.values);
  CHECK(milp.nodes_explored == 1);
}

TEST_CASE("solve_milp: empty integer slice is infeasible") {
  MilpProblem p;
  auto x = p.add_variable("x", 0.2, 0.8, true);
  p.set_objective(LinearExpression(x), Sense::Minimize);
  CHECK(solve_milp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("solve_milp: node limit without incumbent is reported distinctly") {
  // Knapsack-like problem whose root relaxation is fractional.
  MilpProblem p;
  LinearExpression w, v;
  for (int j = 0; j < 8; ++j) {
    auto x = p.add_variable("x" + std::to_string(j), 0, 1, true);
    w.add(x, 3 + 2 * j);
    v.add(x, 5 + 3 * j);
  }
  p.add_constraint("w", w, Relation::LessEqual, 20.5);
  p.add_constraint("odd", w, Relation::GreaterEqual, 20.2);  // no integer point exists
  p.set_objective(v, Sense::Maximize);
  MilpOptions opts;
  opts.node_limit = 1;
  try {
    solve_milp(p, opts);
    FAIL("expected NodeLimitExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NodeLimitExceeded);
  }
  opts.node_limit = 100000;
  CHECK(solve_milp(p, opts).status == SolveStatus::Infeasible);
}

TEST_CASE("solve_milp: node limit with an incumbent reports its gap") {
  MilpProblem p;
  LinearExpression w, v;
  for (int j = 0; j < 10; ++j) {
    auto x = p.add_variable("x" + std::to_string(j), 0, 1, true);
    w.add(x, 7 + (j * 5) % 11);
    v.add(x, 6 + (j * 7) % 13);
  }
  p.add_constraint("w", w, Relation::LessEqual, 40);
  p.set_objective(v, Sense::Maximize);
  MilpOptions opts;
  opts.node_limit = 6;
  MilpSolution s;
  try {
    s = solve_milp(p, opts);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NodeLimitExceeded);
    return;
  }
  CHECK(s.has_solution());
  if (s.status == SolveStatus::Feasible) CHECK(s.gap > opts.rel_gap);
  CHECK(p.max_violation(s.values) <= 1e-6);
}

TEST_CASE("solve_milp property: random MILPs agree with exhaustive enumeration") {
  std::mt19937 rng(99);
  for (int k = 0; k < 25; ++k) {
    auto lp = oracle::random_milp(rng, 10, 5);
    auto expected = oracle::exhaustive_milp(lp);
    auto problem = oracle::to_problem(lp);
    auto s = solve_milp(problem);
    if (!expected) {
      CHECK(s.status == SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(std::abs(s.objective - *expected) <= 1e-6);
    CHECK(problem.max_violation(s.values) <= 1e-6);
    // Weak duality along the search: explored bounds never beat the optimum.
    for (double b : s.explored_bounds) {
      if (lp.maximize)
        CHECK(b >= s.objective - 1e-8);
      else
        CHECK(b <= s.objective + 1e-8);
    }
  }
}

TEST_CASE("solve_milp is deterministic") {
  std::mt19937 rng(5);
  auto lp = oracle::random_milp(rng, 12, 6);
  auto problem = oracle::to_problem(lp);
  auto a = solve_milp(problem);
  auto b = solve_milp(problem);
  CHECK(a.status == b.status);
  CHECK(a.values == b.values);
  CHECK(a.nodes_explored == b.nodes_explored);
}

TEST_CASE("solve_milp rejects invalid options") {
  MilpProblem p;
  p.add_variable("x", 0, 1, true);
  MilpOptions bad;
  bad.rel_gap = -1;
  CHECK_THROWS_AS(solve_milp(p, bad), Error);
  bad.rel_gap = 0;
  bad.node_limit = 0;
  CHECK_THROWS_AS(solve_milp(p, bad), Error);
}
