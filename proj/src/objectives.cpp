#include "mesopt/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace mesopt {

std::string_view objective_kind_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Annuity: return "Annuity";
    case ObjectiveKind::OperatingCost: return "OperatingCost";
    case ObjectiveKind::CO2: return "CO2";
    case ObjectiveKind::SelfConsumption: return "SelfConsumption";
    case ObjectiveKind::Custom: return "Custom";
  }
  return "unknown";
}

std::optional<ObjectiveKind> parse_objective_kind(std::string_view name) {
  for (auto k : {ObjectiveKind::Annuity, ObjectiveKind::OperatingCost, ObjectiveKind::CO2,
                 ObjectiveKind::SelfConsumption, ObjectiveKind::Custom})
    if (objective_kind_name(k) == name) return k;
  return std::nullopt;
}

double PriceSeries::at(std::size_t t, const ProfileMap& profiles) const {
  if (!profile) return scalar;
  auto it = profiles.find(*profile);
  if (it == profiles.end())
    throw Error(ErrorCode::MissingProfile, "price profile '" + *profile + "' is not defined");
  if (t >= it->second.size())
    throw Error(ErrorCode::HorizonMismatch, "price profile '" + *profile + "' is shorter than the horizon");
  return it->second[t];
}

double annuity_factor(double interest_rate, int lifetime_years) {
  if (lifetime_years < 1 || !(interest_rate >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "annuity factor needs lifetime >= 1 and interest >= 0");
  const double n = lifetime_years;
  if (interest_rate == 0.0) return 1.0 / n;
  const double q = std::pow(1.0 + interest_rate, n);
  return interest_rate * q / (q - 1.0);
}

namespace {

class ObjectiveBuilder {
 public:
  ObjectiveBuilder(const NetworkModel& model, const CostParameters& cost, const ProfileMap& profiles)
      : model_(model), cost_(cost), profiles_(profiles) {}

  // Weighted energy of a per-step flow, kWh.
  LinearExpression energy(const std::vector<VariableId>& vars, const std::vector<double>* factor = nullptr) const {
    LinearExpression e;
    const auto& h = model_.horizon;
    for (std::size_t t = 0; t < vars.size(); ++t) {
      double c = h.weight(t) * h.dt_hours * (factor ? (*factor)[t] : 1.0);
      if (c != 0.0) e.add(vars[t], c);
    }
    return e;
  }

  std::vector<double> series(const PriceSeries& p) const {
    std::vector<double> out(model_.horizon.steps);
    for (std::size_t t = 0; t < out.size(); ++t) {
      out[t] = p.at(t, profiles_);
      if (!(out[t] >= 0.0) || !std::isfinite(out[t]))
        throw Error(ErrorCode::InvalidArgument, "prices must be non-negative");
    }
    return out;
  }

  static const std::vector<VariableId>& throughput(const ComponentBlock& b) {
    switch (b.archetype) {
      case Archetype::Generator:
      case Archetype::Converter: return b.output;
      case Archetype::Storage: return b.discharge;
      case Archetype::GridConnection: return b.imports;
      case Archetype::Demand: break;
    }
    static const std::vector<VariableId> none;
    return none;
  }

  LinearExpression operating_cost() const {
    LinearExpression e;
    for (std::size_t k = 0; k < model_.blocks.size(); ++k) {
      const auto& b = model_.blocks[k];
      const auto& spec = model_.specs[k];
      if (b.archetype == Archetype::GridConnection && model_.external[k]) {
        Carrier c = spec.carrier();
        auto imp = cost_.import_price.find(c);
        if (imp == cost_.import_price.end())
          throw Error(ErrorCode::MissingCostParameter,
                      "no import price for " + std::string(carrier_name(c)) + " (grid '" + b.owner + "')");
        auto price = series(imp->second);
        e += energy(b.imports, &price);
        if (!b.exports.empty()) {
          auto rem = cost_.export_remuneration.find(c);
          if (rem != cost_.export_remuneration.end()) {
            auto pay = series(rem->second);
            e -= energy(b.exports, &pay);
          }
        }
      }
      if (spec.opex_per_unit_energy > 0.0) e += spec.opex_per_unit_energy * energy(throughput(b));
    }
    return e;
  }

  double annual_scale() const { return 8760.0 / model_.horizon.represented_hours(); }

  LinearExpression annuity() const {
    LinearExpression e;
    for (std::size_t k = 0; k < model_.blocks.size(); ++k) {
      const auto& b = model_.blocks[k];
      const auto& spec = model_.specs[k];
      if (b.archetype == Archetype::Demand || spec.capex_per_unit == 0.0) continue;
      if (!b.capacity_var && !std::isfinite(b.fixed_capacity)) continue;
      e += annuity_factor(cost_.interest_rate, spec.lifetime_years) * spec.capex_per_unit *
           b.capacity_expr();
    }
    e += annual_scale() * operating_cost();
    return e;
  }

  LinearExpression co2() const {
    LinearExpression e;
    for (std::size_t k = 0; k < model_.blocks.size(); ++k) {
      const auto& b = model_.blocks[k];
      const auto& spec = model_.specs[k];
      if (b.archetype == Archetype::GridConnection && model_.external[k]) {
        Carrier c = spec.carrier();
        auto f = cost_.co2_factor.find(c);
        if (f == cost_.co2_factor.end())
          throw Error(ErrorCode::MissingCostParameter,
                      "no CO2 factor for " + std::string(carrier_name(c)) + " (grid '" + b.owner + "')");
        e += f->second * energy(b.imports);
      }
      if (spec.co2_per_unit_energy > 0.0) e += spec.co2_per_unit_energy * energy(throughput(b));
    }
    return e;
  }

  LinearExpression self_consumption() const {
    LinearExpression e;
    for (std::size_t k = 0; k < model_.blocks.size(); ++k) {
      const auto& b = model_.blocks[k];
      if (b.archetype == Archetype::Generator) e += energy(b.output);
      if (b.archetype == Archetype::GridConnection && model_.external[k]) e -= energy(b.exports);
    }
    return e;
  }

  LinearExpression quantity(const std::string& name) const {
    if (name == "annuity") return annuity();
    if (name == "operating_cost") return operating_cost();
    if (name == "co2") return co2();
    if (name == "self_consumption") return self_consumption();
    auto dot = name.rfind('.');
    if (dot == std::string::npos || dot == 0)
      throw Error(ErrorCode::UnknownQuantity, "unknown quantity '" + name + "'");
    const std::string comp = name.substr(0, dot);
    const std::string what = name.substr(dot + 1);
    LinearExpression e;
    bool matched = false;
    for (const auto& b : model_.blocks) {
      bool hit = b.owner == comp || (b.owner.size() > comp.size() &&
                                     b.owner.compare(b.owner.size() - comp.size(), comp.size(), comp) == 0 &&
                                     b.owner[b.owner.size() - comp.size() - 1] == '/');
      if (!hit) continue;
      const auto a = b.archetype;
      if (what == "capacity" && a != Archetype::Demand) {
        if (!b.capacity_var && !std::isfinite(b.fixed_capacity))
          throw Error(ErrorCode::UnknownQuantity, "'" + name + "' is unlimited");
        e += b.capacity_expr();
      } else if (what == "import" && a == Archetype::GridConnection) {
        e += energy(b.imports);
      } else if (what == "export" && a == Archetype::GridConnection) {
        e += energy(b.exports);
      } else if (what == "generation" && a == Archetype::Generator) {
        e += energy(b.output);
      } else if (what == "output" && (a == Archetype::Generator || a == Archetype::Converter)) {
        e += energy(b.output);
      } else if (what == "input" && (a == Archetype::Demand || a == Archetype::Converter)) {
        e += energy(b.input);
      } else if (what == "demand" && a == Archetype::Demand) {
        e += energy(b.input);
      } else if (what == "charge" && a == Archetype::Storage) {
        e += energy(b.charge);
      } else if (what == "discharge" && a == Archetype::Storage) {
        e += energy(b.discharge);
      } else {
        continue;
      }
      matched = true;
    }
    if (!matched) throw Error(ErrorCode::UnknownQuantity, "unknown quantity '" + name + "'");
    return e;
  }

 private:
  const NetworkModel& model_;
  const CostParameters& cost_;
  const ProfileMap& profiles_;
};

}  // namespace

BuiltObjective build_objective(const ObjectiveSpec& spec, const NetworkModel& model,
                               const CostParameters& cost, const ProfileMap& profiles) {
  if (!(cost.interest_rate >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "interest rate must be non-negative");
  ObjectiveBuilder b(model, cost, profiles);
  switch (spec.kind) {
    case ObjectiveKind::Annuity: return {b.annuity(), Sense::Minimize};
    case ObjectiveKind::OperatingCost: return {b.operating_cost(), Sense::Minimize};
    case ObjectiveKind::CO2: return {b.co2(), Sense::Minimize};
    case ObjectiveKind::SelfConsumption: return {b.self_consumption(), Sense::Maximize};
    case ObjectiveKind::Custom: {
      if (spec.custom_terms.empty())
        throw Error(ErrorCode::InvalidArgument, "a Custom objective needs at least one term");
      LinearExpression e;
      for (const auto& [name, weight] : spec.custom_terms) e += weight * b.quantity(name);
      return {e, Sense::Minimize};
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown objective kind");
}

namespace {

double slack(double v) { return std::min(1e-7, 1e-9 * std::max(1.0, std::abs(v))); }

MilpSolution solve_or_throw(const MilpProblem& p, const MilpOptions& options) {
  auto s = solve_milp(p, options);
  if (s.status == SolveStatus::Infeasible)
    throw Error(ErrorCode::Infeasible, "InfeasibleModel: the model has no feasible point");
  if (s.status == SolveStatus::Unbounded)
    throw Error(ErrorCode::Unbounded, "objective is unbounded on the model");
  return s;
}

// Minimizes `first`, then `second` with `first` held at its optimum.
ParetoPoint lexicographic(MilpProblem p, const LinearExpression& first, const LinearExpression& second,
                          bool first_is_a, const MilpOptions& options) {
  p.set_objective(first, Sense::Minimize);
  auto s1 = solve_or_throw(p, options);
  double v1 = first.evaluate(s1.values);
  p.add_constraint("pareto_lex", first, Relation::LessEqual, v1 + slack(v1));
  p.set_objective(second, Sense::Minimize);
  auto s2 = solve_or_throw(p, options);
  ParetoPoint pt;
  pt.objective_a = (first_is_a ? first : second).evaluate(s2.values);
  pt.objective_b = (first_is_a ? second : first).evaluate(s2.values);
  pt.solution = std::move(s2);
  return pt;
}

}  // namespace

std::vector<ParetoPoint> pareto_front(const MilpProblem& base, const LinearExpression& a,
                                      const LinearExpression& b, std::size_t n_points,
                                      const MilpOptions& options) {
  if (n_points < 2) throw Error(ErrorCode::InvalidArgument, "a Pareto front needs at least 2 points");
  auto best_a = lexicographic(base, a, b, true, options);
  auto best_b = lexicographic(base, b, a, false, options);
  const double b_max = best_a.objective_b;
  const double b_min = best_b.objective_b;

  std::vector<ParetoPoint> raw{best_a};
  for (std::size_t k = 1; k + 1 < n_points; ++k) {
    double eps = b_max - (b_max - b_min) * double(k) / double(n_points - 1);
    MilpProblem p = base;
    p.add_constraint("pareto_eps", b, Relation::LessEqual, eps + slack(eps));
    raw.push_back(lexicographic(std::move(p), a, b, true, options));
  }
  raw.push_back(best_b);

  std::vector<ParetoPoint> front;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    bool drop = false;
    for (std::size_t j = 0; j < raw.size() && !drop; ++j) {
      if (i == j) continue;
      const auto &p = raw[i], &q = raw[j];
      bool same = std::abs(p.objective_a - q.objective_a) <= 1e-6 && std::abs(p.objective_b - q.objective_b) <= 1e-6;
      if (same) {
        drop = j < i;
        continue;
      }
      bool dominated = q.objective_a <= p.objective_a + 1e-9 && q.objective_b <= p.objective_b + 1e-9;
      drop = dominated;
    }
    if (!drop) front.push_back(raw[i]);
  }
  std::stable_sort(front.begin(), front.end(), [](const ParetoPoint& x, const ParetoPoint& y) {
    return x.objective_a < y.objective_a || (x.objective_a == y.objective_a && x.objective_b > y.objective_b);
  });
  return front;
}

std::vector<ParetoPoint> generate_pareto_front(const NetworkModel& model, const ObjectiveSpec& a,
                                               const ObjectiveSpec& b, std::size_t n_points,
                                               const CostParameters& cost,
                                               const ProfileMap& profiles,
                                               const MilpOptions& options) {
  auto oa = build_objective(a, model, cost, profiles);
  auto ob = build_objective(b, model, cost, profiles);
  const double sa = oa.sense == Sense::Maximize ? -1.0 : 1.0;
  const double sb = ob.sense == Sense::Maximize ? -1.0 : 1.0;
  auto front = pareto_front(model.problem, sa * oa.expr, sb * ob.expr, n_points, options);
  for (auto& p : front) {
    p.objective_a *= sa;
    p.objective_b *= sb;
  }
  if (sa < 0) std::reverse(front.begin(), front.end());
  return front;
}

}  // namespace mesopt
