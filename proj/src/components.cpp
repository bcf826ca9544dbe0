#include "mesopt/components.hpp"

#include <cmath>

namespace mesopt {

std::string_view carrier_name(Carrier carrier) {
  switch (carrier) {
    case Carrier::Electricity: return "electricity";
    case Carrier::Heat: return "heat";
    case Carrier::Cooling: return "cooling";
    case Carrier::Gas: return "gas";
    case Carrier::Hydrogen: return "hydrogen";
  }
  return "unknown";
}

std::optional<Carrier> parse_carrier(std::string_view name) {
  for (Carrier c : kAllCarriers)
    if (carrier_name(c) == name) return c;
  return std::nullopt;
}

std::string_view archetype_name(Archetype archetype) {
  switch (archetype) {
    case Archetype::Generator: return "Generator";
    case Archetype::Storage: return "Storage";
    case Archetype::Converter: return "Converter";
    case Archetype::GridConnection: return "GridConnection";
    case Archetype::Demand: return "Demand";
  }
  return "unknown";
}

std::optional<Archetype> parse_archetype(std::string_view name) {
  for (Archetype a : {Archetype::Generator, Archetype::Storage, Archetype::Converter,
                      Archetype::GridConnection, Archetype::Demand})
    if (archetype_name(a) == name) return a;
  return std::nullopt;
}

Carrier ComponentSpec::carrier() const {
  if (carrier_out) return *carrier_out;
  if (carrier_in) return *carrier_in;
  throw Error(ErrorCode::InvalidSpec, "component '" + name + "' has no carrier");
}

std::vector<std::string> validate_spec(const ComponentSpec& spec) {
  std::vector<std::string> out;
  auto fail = [&](const std::string& what) { out.push_back("component '" + spec.name + "': " + what); };
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };

  if (spec.name.empty()) out.push_back("component with empty name");
  switch (spec.archetype) {
    case Archetype::Generator:
      if (!spec.carrier_out || spec.carrier_in) fail("a Generator has an output carrier only");
      break;
    case Archetype::Demand:
      if (!spec.carrier_in || spec.carrier_out) fail("a Demand has an input carrier only");
      if (!spec.profile) fail("a Demand needs a profile");
      break;
    case Archetype::Converter:
      if (!spec.carrier_in || !spec.carrier_out)
        fail("a Converter needs input and output carriers");
      else if (*spec.carrier_in == *spec.carrier_out)
        fail("a Converter must change carrier");
      if (!(spec.conversion_ratio > 0.0)) fail("conversion_ratio must be positive");
      break;
    case Archetype::Storage:
    case Archetype::GridConnection:
      if (!spec.carrier_in && !spec.carrier_out)
        fail("needs exactly one carrier");
      else if (spec.carrier_in && spec.carrier_out && *spec.carrier_in != *spec.carrier_out)
        fail("needs exactly one carrier");
      break;
  }
  if (spec.bidirectional && spec.archetype != Archetype::Storage &&
      spec.archetype != Archetype::GridConnection)
    fail("only Storage and GridConnection may be bidirectional");
  if (!in_unit(spec.efficiency)) fail("efficiency must lie in (0, 1]");
  if (spec.archetype == Archetype::Storage) {
    if (!in_unit(spec.charge_efficiency)) fail("charge_efficiency must lie in (0, 1]");
    if (!in_unit(spec.discharge_efficiency)) fail("discharge_efficiency must lie in (0, 1]");
    if (spec.power_limit && !(*spec.power_limit >= 0.0)) fail("power_limit must be non-negative");
  }
  if (spec.capacity) {
    bool unlimited_grid = spec.archetype == Archetype::GridConnection && *spec.capacity == kInf;
    if (!(*spec.capacity >= 0.0) || (!std::isfinite(*spec.capacity) && !unlimited_grid))
      fail("capacity must be a non-negative number");
  }
  if (spec.max_capacity && !(*spec.max_capacity >= 0.0)) fail("max_capacity must be non-negative");
  if (spec.lifetime_years < 1) fail("lifetime_years must be at least 1");
  if (spec.capex_per_unit < 0 || spec.opex_per_unit_energy < 0 || spec.co2_per_unit_energy < 0)
    fail("cost and emission factors must be non-negative");
  if (spec.exclusive_charging && spec.archetype != Archetype::Storage)
    fail("exclusive_charging applies to Storage only");
  return out;
}

double Horizon::represented_hours() const {
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) total += weight(t) * dt_hours;
  return total;
}

void Horizon::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "horizon needs at least one timestep");
  if (!(dt_hours > 0.0)) throw Error(ErrorCode::InvalidArgument, "timestep length must be positive");
  if (steps % period_len() != 0)
    throw Error(ErrorCode::IndivisibleLength, "horizon of " + std::to_string(steps) +
                                                  " steps is not a multiple of period length " +
                                                  std::to_string(period_len()));
  if (!weights.empty() && weights.size() != steps)
    throw Error(ErrorCode::HorizonMismatch, "step weights do not match the horizon length");
}

LinearExpression ComponentBlock::capacity_expr() const {
  if (capacity_var) return LinearExpression(*capacity_var, 1.0);
  return LinearExpression(fixed_capacity);
}

double ComponentBlock::capacity_value(const std::vector<double>& values) const {
  return capacity_var ? values.at(capacity_var->index) : fixed_capacity;
}

std::vector<std::pair<std::string, const std::vector<VariableId>*>> ComponentBlock::flows() const {
  std::vector<std::pair<std::string, const std::vector<VariableId>*>> out;
  auto push = [&](const char* name, const std::vector<VariableId>& vars) {
    if (!vars.empty()) out.emplace_back(name, &vars);
  };
  push("p_in", input);
  push("p_out", output);
  push("p_ch", charge);
  push("p_dis", discharge);
  push("import", imports);
  push("export", exports);
  return out;
}

namespace {

std::string step_name(std::string_view owner, std::string_view quantity, std::size_t t) {
  std::string s(owner);
  s += '/';
  s += quantity;
  s += '/';
  s += std::to_string(t);
  return s;
}

const std::vector<double>* resolve_profile(const ComponentSpec& spec, const Horizon& horizon,
                                           const ProfileMap& profiles) {
  if (!spec.profile) return nullptr;
  auto it = profiles.find(*spec.profile);
  if (it == profiles.end())
    throw Error(ErrorCode::MissingProfile,
                "component '" + spec.name + "' references unknown profile '" + *spec.profile + "'");
  if (it->second.size() != horizon.steps)
    throw Error(ErrorCode::HorizonMismatch,
                "profile '" + *spec.profile + "' has " + std::to_string(it->second.size()) +
                    " values but the horizon has " + std::to_string(horizon.steps) + " steps");
  return &it->second;
}

}  // namespace

ComponentBlock emit_component_constraints(const ComponentSpec& spec, const Horizon& horizon,
                                          Mode mode, MilpProblem& problem,
                                          const ProfileMap& profiles, std::string_view owner) {
  horizon.validate();
  if (spec.archetype == Archetype::Demand && !spec.profile)
    throw Error(ErrorCode::MissingProfile, "demand '" + spec.name + "' has no profile");
  if (auto issues = validate_spec(spec); !issues.empty())
    throw Error(ErrorCode::InvalidSpec, issues.front());

  ComponentBlock block;
  block.owner = std::string(owner);
  block.name = spec.name;
  block.archetype = spec.archetype;
  block.mode = mode;

  const std::size_t T = horizon.steps;
  const double dt = horizon.dt_hours;
  const bool has_capacity = spec.archetype != Archetype::Demand;
  const bool sizing = has_capacity && mode == Mode::Sizing;

  if (has_capacity && !sizing && !spec.capacity)
    throw Error(ErrorCode::MissingCapacity,
                "component '" + spec.name + "' runs in operation mode without a capacity");

  const std::vector<double>* profile = resolve_profile(spec, horizon, profiles);
  if (profile && spec.archetype == Archetype::Generator) {
    for (double v : *profile)
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::InvalidSpec, "generator '" + spec.name + "' profile '" +
                                                *spec.profile + "' leaves [0, 1]");
  }
  if (profile && spec.archetype == Archetype::Demand) {
    for (double v : *profile)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorCode::InvalidSpec,
                    "demand '" + spec.name + "' profile '" + *spec.profile + "' must be non-negative");
  }

  if (sizing) {
    block.capacity_var = problem.add_variable(block.owner + "/cap", 0.0,
                                              spec.max_capacity.value_or(kInf));
  } else if (has_capacity) {
    block.fixed_capacity = *spec.capacity;
  }
  const double cap = block.fixed_capacity;

  auto add_row = [&](std::string name, const LinearExpression& e, Relation r, double rhs) {
    block.constraints.push_back(problem.add_constraint(name, e, r, rhs));
  };
  // x[t] <= factor * capacity, as a bound in operation mode or a row when sized.
  auto cap_limit = [&](VariableId x, double factor, const std::string& row_name) {
    if (!sizing) {
      problem.set_bounds(x, problem.variable(x).lower, factor == 0.0 ? 0.0 : factor * cap);
    } else {
      add_row(row_name, LinearExpression(x, 1.0) - factor * LinearExpression(*block.capacity_var),
              Relation::LessEqual, 0.0);
    }
  };

  switch (spec.archetype) {
    case Archetype::Generator: {
      for (std::size_t t = 0; t < T; ++t) {
        double avail = profile ? (*profile)[t] : 1.0;
        auto p = problem.add_variable(step_name(block.owner, "p_out", t), 0.0, kInf);
        block.output.push_back(p);
        cap_limit(p, avail, step_name(block.owner, "avail", t));
      }
      break;
    }
    case Archetype::Demand: {
      for (std::size_t t = 0; t < T; ++t) {
        double d = (*profile)[t];
        block.input.push_back(problem.add_variable(step_name(block.owner, "p_in", t), d, d));
      }
      break;
    }
    case Archetype::Converter: {
      for (std::size_t t = 0; t < T; ++t) {
        auto in = problem.add_variable(step_name(block.owner, "p_in", t), 0.0, kInf);
        auto out = problem.add_variable(step_name(block.owner, "p_out", t), 0.0, kInf);
        block.input.push_back(in);
        block.output.push_back(out);
        add_row(step_name(block.owner, "conv", t),
                LinearExpression(out, 1.0) - spec.conversion_ratio * LinearExpression(in),
                Relation::Equal, 0.0);
        cap_limit(out, 1.0, step_name(block.owner, "cap_out", t));
      }
      break;
    }
    case Archetype::Storage: {
      // Power limit: explicit kW, or one hour of capacity.
      std::optional<double> fixed_power = spec.power_limit;
      if (!fixed_power && !sizing) fixed_power = cap;
      std::optional<double> big_m = fixed_power;
      if (!big_m && spec.max_capacity) big_m = *spec.max_capacity;
      if (spec.exclusive_charging && !big_m)
        throw Error(ErrorCode::InvalidSpec,
                    "storage '" + spec.name +
                        "' needs power_limit or max_capacity to exclude simultaneous charging");

      const std::size_t L = horizon.period_len();
      const std::size_t P = horizon.periods();
      for (std::size_t p = 0; p < P; ++p) {
        std::vector<VariableId> levels;
        for (std::size_t j = 0; j <= L; ++j) {
          std::string name = P == 1 ? step_name(block.owner, "soc", j)
                                    : block.owner + "/soc/p" + std::to_string(p) + "/" +
                                          std::to_string(j);
          auto s = problem.add_variable(name, 0.0, kInf);
          levels.push_back(s);
          cap_limit(s, 1.0, name + "/max");
        }
        block.soc.push_back(std::move(levels));
      }
      for (std::size_t t = 0; t < T; ++t) {
        auto ch = problem.add_variable(step_name(block.owner, "p_ch", t), 0.0, kInf);
        auto dis = problem.add_variable(step_name(block.owner, "p_dis", t), 0.0, kInf);
        block.charge.push_back(ch);
        block.discharge.push_back(dis);
        if (fixed_power) {
          problem.set_bounds(ch, 0.0, *fixed_power);
          problem.set_bounds(dis, 0.0, *fixed_power);
        } else {
          cap_limit(ch, 1.0, step_name(block.owner, "ch_max", t));
          cap_limit(dis, 1.0, step_name(block.owner, "dis_max", t));
        }
        if (spec.exclusive_charging) {
          auto u = problem.add_variable(step_name(block.owner, "u", t), 0.0, 1.0, true);
          block.mode_binary.push_back(u);
          add_row(step_name(block.owner, "ch_excl", t),
                  LinearExpression(ch, 1.0) - *big_m * LinearExpression(u), Relation::LessEqual, 0.0);
          add_row(step_name(block.owner, "dis_excl", t),
                  LinearExpression(dis, 1.0) + *big_m * LinearExpression(u), Relation::LessEqual,
                  *big_m);
        }
      }
      for (std::size_t p = 0; p < P; ++p) {
        const auto& s = block.soc[p];
        for (std::size_t j = 0; j < L; ++j) {
          std::size_t t = p * L + j;
          LinearExpression e(s[j + 1], 1.0);
          e.add(s[j], -1.0);
          e.add(block.charge[t], -spec.charge_efficiency * dt);
          e.add(block.discharge[t], dt / spec.discharge_efficiency);
          add_row(step_name(block.owner, "soc_dyn", t), e, Relation::Equal, 0.0);
        }
        add_row(step_name(block.owner, "soc_cycle", p),
                LinearExpression(s[L], 1.0) - LinearExpression(s[0], 1.0), Relation::Equal, 0.0);
      }
      break;
    }
    case Archetype::GridConnection: {
      for (std::size_t t = 0; t < T; ++t) {
        auto imp = problem.add_variable(step_name(block.owner, "import", t), 0.0, kInf);
        block.imports.push_back(imp);
        cap_limit(imp, 1.0, step_name(block.owner, "import_max", t));
        if (spec.bidirectional) {
          auto exp = problem.add_variable(step_name(block.owner, "export", t), 0.0, kInf);
          block.exports.push_back(exp);
          cap_limit(exp, 1.0, step_name(block.owner, "export_max", t));
        }
      }
      break;
    }
  }
  return block;
}

}  // namespace mesopt
