#include "doctest.h"

#include <random>

#include "mesopt/components.hpp"
#include "mesopt/simplex.hpp"

using namespace mesopt;

namespace {

ComponentSpec storage(double cap) {
  ComponentSpec s;
  s.name = "bat";
  s.archetype = Archetype::Storage;
  s.carrier_in = Carrier::Electricity;
  s.capacity = cap;
  return s;
}

ComponentSpec generator(std::optional<double> cap, std::string profile) {
  ComponentSpec s;
  s.name = "pv";
  s.archetype = Archetype::Generator;
  s.carrier_out = Carrier::Electricity;
  s.capacity = cap;
  s.profile = std::move(profile);
  return s;
}

ComponentSpec grid() {
  ComponentSpec s;
  s.name = "grid";
  s.archetype = Archetype::GridConnection;
  s.carrier_in = Carrier::Electricity;
  s.capacity = kInf;
  return s;
}

Horizon horizon(std::size_t steps) {
  Horizon h;
  h.steps = steps;
  return h;
}

// pv + grid import meet a fixed demand; returns the solution and the pv block.
struct ToyResult {
  MilpSolution solution;
  ComponentBlock pv;
};

ToyResult solve_toy(const ComponentSpec& pv_spec, Mode mode, const std::vector<double>& demand,
                    const ProfileMap& profiles, double capex, double price) {
  MilpProblem p;
  Horizon h = horizon(demand.size());
  auto pv = emit_component_constraints(pv_spec, h, mode, p, profiles, "pv");
  auto g = emit_component_constraints(grid(), h, Mode::Operation, p, profiles, "grid");
  LinearExpression obj;
  if (pv.capacity_var) obj.add(*pv.capacity_var, capex);
  for (std::size_t t = 0; t < demand.size(); ++t) {
    p.add_constraint("bal/" + std::to_string(t), LinearExpression(pv.output[t]) + LinearExpression(g.imports[t]),
                     Relation::Equal, demand[t]);
    obj.add(g.imports[t], price);
  }
  p.set_objective(obj, Sense::Minimize);
  return {solve_milp(p), pv};
}

}  // namespace

TEST_CASE("storage: lossless round trip closes the cycle") {
  MilpProblem p;
  auto b = emit_component_constraints(storage(1.0), horizon(2), Mode::Operation, p, {}, "bat");
  REQUIRE(b.soc.size() == 1);
  REQUIRE(b.soc[0].size() == 3);
  std::vector<double> x(p.num_variables(), 0.0);
  x[b.charge[0].index] = 1.0;
  x[b.discharge[1].index] = 1.0;
  x[b.soc[0][1].index] = 1.0;
  CHECK(p.max_violation(x) == 0.0);
  // Ending with energy left is not cyclic.
  x[b.discharge[1].index] = 0.0;
  x[b.soc[0][2].index] = 1.0;
  CHECK(p.max_violation(x) > 0.5);
}

TEST_CASE("generator: availability scales the capacity bound") {
  MilpProblem p;
  ProfileMap prof{{"sun", {0.5, 1.0}}};
  auto g = emit_component_constraints(generator(5.0, "sun"), horizon(2), Mode::Operation, p, prof, "pv");
  CHECK(p.variable(g.output[0]).upper == 2.5);
  CHECK(p.variable(g.output[1]).upper == 5.0);
  CHECK(p.find_variable("pv/p_out/1").has_value());
  CHECK_FALSE(g.capacity_var.has_value());
}

TEST_CASE("converter: ratio couples input and output") {
  ComponentSpec hp;
  hp.name = "hp";
  hp.archetype = Archetype::Converter;
  hp.carrier_in = Carrier::Electricity;
  hp.carrier_out = Carrier::Heat;
  hp.conversion_ratio = 3.0;
  hp.capacity = 10.0;
  MilpProblem p;
  auto b = emit_component_constraints(hp, horizon(1), Mode::Operation, p, {}, "hp");
  p.set_bounds(b.input[0], 2.0, 2.0);
  p.set_objective(LinearExpression(b.output[0]), Sense::Maximize);
  auto hi = solve_lp(p);
  p.set_objective(LinearExpression(b.output[0]), Sense::Minimize);
  auto lo = solve_lp(p);
  REQUIRE(hi.status == SolveStatus::Optimal);
  REQUIRE(lo.status == SolveStatus::Optimal);
  CHECK(hi.objective == doctest::Approx(6.0));
  CHECK(lo.objective == doctest::Approx(6.0));
}

TEST_CASE("emission errors") {
  MilpProblem p;
  ProfileMap prof{{"sun", {0.5, 1.0}}, {"long", {0.1, 0.2, 0.3}}, {"bad", {0.5, 1.5}}};
  SUBCASE("operation without capacity") {
    try {
      emit_component_constraints(generator(std::nullopt, "sun"), horizon(2), Mode::Operation, p, prof, "pv");
      FAIL("expected MissingCapacity");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingCapacity);
    }
  }
  SUBCASE("demand without profile") {
    ComponentSpec d;
    d.name = "load";
    d.archetype = Archetype::Demand;
    d.carrier_in = Carrier::Electricity;
    try {
      emit_component_constraints(d, horizon(2), Mode::Operation, p, prof, "load");
      FAIL("expected MissingProfile");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingProfile);
    }
  }
  SUBCASE("profile length") {
    try {
      emit_component_constraints(generator(1.0, "long"), horizon(2), Mode::Operation, p, prof, "pv");
      FAIL("expected HorizonMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HorizonMismatch);
    }
  }
  SUBCASE("availability outside the unit interval") {
    CHECK_THROWS_AS(
        emit_component_constraints(generator(1.0, "bad"), horizon(2), Mode::Operation, p, prof, "pv"),
        Error);
  }
  SUBCASE("invariant violations") {
    ComponentSpec c = generator(1.0, "sun");
    c.carrier_in = Carrier::Gas;
    CHECK_FALSE(validate_spec(c).empty());
    ComponentSpec hp;
    hp.name = "hp";
    hp.archetype = Archetype::Converter;
    hp.carrier_in = hp.carrier_out = Carrier::Heat;
    CHECK_FALSE(validate_spec(hp).empty());
    ComponentSpec bi = generator(1.0, "sun");
    bi.bidirectional = true;
    CHECK_FALSE(validate_spec(bi).empty());
    ComponentSpec eff = storage(1.0);
    eff.charge_efficiency = 1.2;
    CHECK_FALSE(validate_spec(eff).empty());
  }
}

TEST_CASE("sizing: an uneconomic generator is sized to zero") {
  const std::vector<double> demand{2.0, 3.0, 1.0};
  ProfileMap prof{{"sun", {0.2, 0.9, 0.4}}};
  const double capex = 50.0, price = 0.3;

  // Oracle: compare every candidate size on a fine grid.
  double best_cost = kInf, best_cap = -1;
  for (int k = 0; k <= 1000; ++k) {
    double cap = 0.01 * k;
    double cost = capex * cap;
    for (std::size_t t = 0; t < demand.size(); ++t)
      cost += price * std::max(0.0, demand[t] - cap * prof["sun"][t]);
    if (cost < best_cost) {
      best_cost = cost;
      best_cap = cap;
    }
  }
  CHECK(best_cap == 0.0);

  auto r = solve_toy(generator(std::nullopt, "sun"), Mode::Sizing, demand, prof, capex, price);
  REQUIRE(r.solution.status == SolveStatus::Optimal);
  REQUIRE(r.pv.capacity_var.has_value());
  CHECK(r.solution.values[r.pv.capacity_var->index] <= 1e-9);
  CHECK(r.solution.objective == doctest::Approx(best_cost).epsilon(1e-9));

  // A cheap generator is built up to the sunniest hour's need.
  auto cheap = solve_toy(generator(std::nullopt, "sun"), Mode::Sizing, demand, prof, 0.01, price);
  CHECK(cheap.solution.values[cheap.pv.capacity_var->index] > 1.0);
}

TEST_CASE("sizing: capacity variable honours max_capacity") {
  MilpProblem p;
  ComponentSpec g = generator(std::nullopt, "sun");
  g.max_capacity = 4.0;
  ProfileMap prof{{"sun", {1.0}}};
  auto b = emit_component_constraints(g, horizon(1), Mode::Sizing, p, prof, "pv");
  REQUIRE(b.capacity_var.has_value());
  CHECK(p.variable(*b.capacity_var).lower == 0.0);
  CHECK(p.variable(*b.capacity_var).upper == 4.0);
  CHECK(p.variable(*b.capacity_var).name == "pv/cap");
}

TEST_CASE("property: operation mode equals sizing with the capacity fixed") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> demand(4);
    ProfileMap prof{{"sun", std::vector<double>(4)}};
    for (int t = 0; t < 4; ++t) {
      demand[t] = 3.0 * u(rng);
      prof["sun"][t] = u(rng);
    }
    double cap = 4.0 * u(rng);
    auto op = solve_toy(generator(cap, "sun"), Mode::Operation, demand, prof, 0.0, 0.25);

    ComponentSpec sized = generator(std::nullopt, "sun");
    sized.max_capacity = cap;
    MilpProblem p;
    auto pv = emit_component_constraints(sized, horizon(4), Mode::Sizing, p, prof, "pv");
    p.set_bounds(*pv.capacity_var, cap, cap);
    auto g = emit_component_constraints(grid(), horizon(4), Mode::Operation, p, prof, "grid");
    LinearExpression obj;
    for (int t = 0; t < 4; ++t) {
      p.add_constraint("bal/" + std::to_string(t), LinearExpression(pv.output[t]) + LinearExpression(g.imports[t]),
                       Relation::Equal, demand[t]);
      obj.add(g.imports[t], 0.25);
    }
    p.set_objective(obj, Sense::Minimize);
    auto sz = solve_milp(p);
    REQUIRE(op.solution.status == SolveStatus::Optimal);
    REQUIRE(sz.status == SolveStatus::Optimal);
    CHECK(std::abs(op.solution.objective - sz.objective) <= 1e-9);
  }
}

namespace {

// Storage arbitrage between two prices; returns the solved problem data.
struct StorageRun {
  MilpProblem problem;
  ComponentBlock block;
  MilpSolution solution;
};

StorageRun arbitrage(ComponentSpec spec, Mode mode, std::size_t period_length = 0) {
  StorageRun r;
  Horizon h = horizon(6);
  h.dt_hours = 0.5;
  h.period_length = period_length;
  const std::vector<double> price{0.1, 0.5, 0.2, 0.6, 0.05, 0.4};
  const std::vector<double> demand{1.0, 2.0, 0.5, 1.5, 0.2, 2.5};
  r.block = emit_component_constraints(spec, h, mode, r.problem, {}, "bat");
  auto g = emit_component_constraints(grid(), h, Mode::Operation, r.problem, {}, "grid");
  LinearExpression obj;
  if (r.block.capacity_var) obj.add(*r.block.capacity_var, 0.01);
  for (std::size_t t = 0; t < 6; ++t) {
    LinearExpression bal = LinearExpression(g.imports[t]) + LinearExpression(r.block.discharge[t]) -
                           LinearExpression(r.block.charge[t]);
    r.problem.add_constraint("bal/" + std::to_string(t), bal, Relation::Equal, demand[t]);
    obj.add(g.imports[t], price[t] * h.dt_hours);
  }
  r.problem.set_objective(obj, Sense::Minimize);
  r.solution = solve_milp(r.problem);
  return r;
}

double storage_residual(const StorageRun& r, const ComponentSpec& s, double dt) {
  double worst = 0;
  const auto& x = r.solution.values;
  std::size_t t = 0;
  for (const auto& soc : r.block.soc) {
    for (std::size_t j = 0; j + 1 < soc.size(); ++j, ++t) {
      double res = x[soc[j + 1].index] - x[soc[j].index] - s.charge_efficiency * dt * x[r.block.charge[t].index] +
                   dt / s.discharge_efficiency * x[r.block.discharge[t].index];
      worst = std::max(worst, std::abs(res));
    }
    worst = std::max(worst, std::abs(x[soc.back().index] - x[soc.front().index]));
  }
  return worst;
}

}  // namespace

TEST_CASE("property: storage dynamics and closure hold on solved models") {
  for (double eta : {1.0, 0.9, 0.7}) {
    ComponentSpec s = storage(2.0);
    s.charge_efficiency = eta;
    s.discharge_efficiency = eta;
    auto r = arbitrage(s, Mode::Operation);
    REQUIRE(r.solution.status == SolveStatus::Optimal);
    CHECK(storage_residual(r, s, 0.5) <= 1e-6);

    // Typical periods close each period separately.
    auto rp = arbitrage(s, Mode::Operation, 3);
    REQUIRE(rp.solution.status == SolveStatus::Optimal);
    CHECK(rp.block.soc.size() == 2);
    CHECK(storage_residual(rp, s, 0.5) <= 1e-6);

    ComponentSpec sized = s;
    sized.capacity.reset();
    sized.max_capacity = 10.0;
    auto rs = arbitrage(sized, Mode::Sizing);
    REQUIRE(rs.solution.status == SolveStatus::Optimal);
    CHECK(storage_residual(rs, sized, 0.5) <= 1e-6);
  }
}

TEST_CASE("property: exclusive charging never charges and discharges at once") {
  // With a negative-price hour, a lossy storage would otherwise burn energy by cycling.
  for (bool exclusive : {false, true}) {
    ComponentSpec s = storage(2.0);
    s.charge_efficiency = 0.8;
    s.discharge_efficiency = 0.8;
    s.exclusive_charging = exclusive;
    MilpProblem p;
    Horizon h = horizon(3);
    auto b = emit_component_constraints(s, h, Mode::Operation, p, {}, "bat");
    ComponentSpec gs = grid();
    gs.bidirectional = true;
    gs.capacity = 5.0;
    auto g = emit_component_constraints(gs, h, Mode::Operation, p, {}, "grid");
    const std::vector<double> price{-1.0, 0.3, 0.3};
    LinearExpression obj;
    for (std::size_t t = 0; t < 3; ++t) {
      p.add_constraint("bal/" + std::to_string(t),
                       LinearExpression(g.imports[t]) - LinearExpression(g.exports[t]) +
                           LinearExpression(b.discharge[t]) - LinearExpression(b.charge[t]),
                       Relation::Equal, 0.5);
      obj.add(g.imports[t], price[t]);
      obj.add(g.exports[t], -price[t] * 0.5);
    }
    p.set_objective(obj, Sense::Minimize);
    auto sol = solve_milp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    double worst = 0;
    for (std::size_t t = 0; t < 3; ++t)
      worst = std::max(worst, sol.values[b.charge[t].index] * sol.values[b.discharge[t].index]);
    if (exclusive) {
      CHECK(b.mode_binary.size() == 3);
      CHECK(worst <= 1e-9);
    }
  }
}

TEST_CASE("exclusive charging without a big-M source is rejected") {
  ComponentSpec s = storage(1.0);
  s.capacity.reset();
  s.exclusive_charging = true;
  MilpProblem p;
  CHECK_THROWS_AS(emit_component_constraints(s, horizon(2), Mode::Sizing, p, {}, "bat"), Error);
}

TEST_CASE("horizon validation") {
  Horizon h = horizon(10);
  h.period_length = 3;
  try {
    h.validate();
    FAIL("expected IndivisibleLength");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndivisibleLength);
  }
  h.period_length = 5;
  CHECK(h.periods() == 2);
  h.weights = {1, 1, 1, 1, 1, 3, 3, 3, 3, 3};
  CHECK(h.represented_hours() == doctest::Approx(20.0));
}
