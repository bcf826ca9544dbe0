#include "mesopt/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <set>

namespace mesopt {

namespace {

MilpSolution solve_checked(const MilpProblem& problem, const MilpOptions& options) {
  auto s = solve_milp(problem, options);
  if (s.status == SolveStatus::Infeasible) throw Error(ErrorCode::Infeasible, "model is infeasible");
  if (s.status == SolveStatus::Unbounded) throw Error(ErrorCode::Unbounded, "model is unbounded");
  return s;
}

template <class F>
auto with_context(const std::string& context, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw e.with_context(context);
  }
}

std::string relative(const std::string& owner, const std::string& prefix) {
  if (owner.size() > prefix.size() && owner.compare(0, prefix.size(), prefix) == 0 && owner[prefix.size()] == '/')
    return owner.substr(prefix.size() + 1);
  return owner;
}

std::vector<double> series(const std::vector<VariableId>& vars, const std::vector<double>& values) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (auto v : vars) out.push_back(values[v.index]);
  return out;
}

LevelResult package(std::string level, std::string name, NetworkModel model, MilpSolution solution,
                    const std::string& prefix) {
  LevelResult r;
  r.level = std::move(level);
  r.name = std::move(name);
  r.status = solution.status;
  r.objective = solution.objective;
  r.gap = solution.gap;
  r.nodes = solution.nodes_explored;
  r.lp_iterations = solution.lp_iterations;
  const auto& x = solution.values;
  const std::size_t T = model.horizon.steps;
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    const auto& b = model.blocks[k];
    const std::string rel = relative(b.owner, prefix);
    if (b.archetype != Archetype::Demand) {
      double cap = b.capacity_value(x);
      if (std::isfinite(cap)) r.capacities[rel] = cap;
    }
    for (const auto& [qty, vars] : b.flows()) r.dispatch[rel + "/" + qty] = series(*vars, x);
    if (b.archetype == Archetype::GridConnection && model.external[k]) {
      auto& res = r.residual_load[model.specs[k].carrier()];
      res.resize(T, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        res[t] += x[b.imports[t].index];
        if (!b.exports.empty()) res[t] -= x[b.exports[t].index];
      }
    }
  }
  r.values = std::move(solution.values);
  r.model = std::make_shared<const NetworkModel>(std::move(model));
  return r;
}

using BusFor = std::function<std::size_t(Carrier)>;

// Connects every port of a stand-alone component to the bus of its carrier.
void attach_all(NetworkBuilder& builder, std::size_t block, const ComponentSpec& spec, const BusFor& bus) {
  switch (spec.archetype) {
    case Archetype::Generator: builder.attach(block, "out", bus(*spec.carrier_out), true, false); break;
    case Archetype::Demand: builder.attach(block, "in", bus(*spec.carrier_in), false, true); break;
    case Archetype::Converter:
      builder.attach(block, "in", bus(*spec.carrier_in), false, true);
      builder.attach(block, "out", bus(*spec.carrier_out), true, false);
      break;
    case Archetype::Storage: builder.attach(block, "io", bus(spec.carrier()), true, true); break;
    case Archetype::GridConnection:
      builder.attach(block, "io", bus(spec.carrier()), true, spec.bidirectional);
      break;
  }
}

// Adds a priced or upstream grid with separate import and export limits.
std::size_t add_grid(NetworkBuilder& builder, const std::string& owner, Carrier c, double import_cap,
                     double export_cap) {
  ComponentSpec g;
  g.name = owner.substr(owner.rfind('/') + 1);
  g.archetype = Archetype::GridConnection;
  g.carrier_in = c;
  g.capacity = import_cap;
  g.bidirectional = export_cap > 0.0;
  auto block = builder.add_component(g, Mode::Operation, owner);
  if (std::isfinite(export_cap))
    for (auto v : builder.model().blocks[block].exports) builder.problem().set_bounds(v, 0.0, export_cap);
  return block;
}

std::map<std::string, double> capacities_by_component(const LevelResult& r) { return r.capacities; }

struct DistrictHandles {
  std::map<Carrier, std::size_t> buses;
  std::map<Carrier, std::size_t> grids;
};

DistrictHandles add_district(NetworkBuilder& builder, const DistrictModel& d, const std::string& prefix,
                             Mode mode, bool frozen, const BusFor* upstream) {
  DistrictHandles h;
  auto bus = [&](Carrier c) {
    auto it = h.buses.find(c);
    if (it != h.buses.end()) return it->second;
    return h.buses[c] = builder.add_bus(prefix + "/bal/" + std::string(carrier_name(c)), c);
  };

  std::set<std::string> names{"central", "grid", "bal", "coord"};
  std::map<Carrier, bool> member_exports;
  for (const auto& m : d.members) {
    if (!names.insert(m.topology.name).second)
      throw Error(ErrorCode::InvalidTopology, "member name '" + m.topology.name + "' is reserved or used twice");
    if (frozen && !m.frozen)
      throw Error(ErrorCode::FrozenCapacityMissing,
                  "member '" + m.topology.name + "' has not been sized at the prosumer level");
    const std::size_t first = builder.model().blocks.size();
    with_context("member '" + m.topology.name + "'", [&] {
      add_topology(builder, m.topology, frozen ? Mode::Operation : mode, prefix + "/" + m.topology.name,
                   frozen ? &*m.frozen : nullptr);
      return 0;
    });
    for (std::size_t k = first; k < builder.model().blocks.size(); ++k) {
      const auto& spec = builder.model().specs[k];
      if (spec.archetype != Archetype::GridConnection) continue;
      builder.attach_upstream(k, bus(spec.carrier()));
      member_exports[spec.carrier()] = member_exports[spec.carrier()] || spec.bidirectional;
    }
  }
  std::set<std::string> central_names;
  for (const auto& spec : d.central) {
    if (spec.archetype == Archetype::GridConnection)
      throw Error(ErrorCode::InvalidTopology, "central component '" + spec.name + "' may not be a grid; use the district grids");
    if (!central_names.insert(spec.name).second)
      throw Error(ErrorCode::InvalidTopology, "central component '" + spec.name + "' is defined twice");
    auto block = with_context("central component '" + spec.name + "'", [&] {
      return builder.add_component(spec, effective_mode(spec, Mode::Sizing), prefix + "/central/" + spec.name);
    });
    attach_all(builder, block, spec, bus);
  }

  std::map<Carrier, DistrictGrid> grids;
  for (auto& [c, exports] : member_exports) grids[c] = {c, kInf, exports ? kInf : 0.0};
  for (const auto& g : d.grids) grids[g.carrier] = g;
  for (const auto& [c, g] : grids) {
    auto block = add_grid(builder, prefix + "/grid/" + std::string(carrier_name(c)), c, g.import_capacity,
                          g.export_capacity);
    builder.attach(block, "io", bus(c), true, g.export_capacity > 0.0);
    if (upstream) builder.attach_upstream(block, (*upstream)(c));
    h.grids[c] = block;
  }
  if (d.peak_import_limit) {
    auto it = h.grids.find(Carrier::Electricity);
    if (it == h.grids.end())
      throw Error(ErrorCode::InvalidArgument, "peak import limit set but the district has no electricity grid");
    const auto& imports = builder.model().blocks[it->second].imports;
    for (std::size_t t = 0; t < imports.size(); ++t)
      builder.problem().add_constraint(prefix + "/coord/peak/" + std::to_string(t), LinearExpression(imports[t]),
                                       Relation::LessEqual, *d.peak_import_limit);
  }
  return h;
}

struct CityHandles {
  std::map<std::pair<std::string, Carrier>, std::size_t> buses;
  std::vector<std::vector<VariableId>> forward, backward;
};

// Node buses, slack grids, plants and links; residual demand is added by the caller.
class CityNetwork {
 public:
  CityNetwork(NetworkBuilder& builder, const CityModel& city, std::string prefix, std::vector<std::string> nodes)
      : builder_(builder), city_(city), prefix_(std::move(prefix)), nodes_(std::move(nodes)) {
    std::set<std::string> seen;
    for (auto& n : nodes_)
      if (!seen.insert(n).second || n == "link")
        throw Error(ErrorCode::InvalidTopology, "city node '" + n + "' is reserved or used twice");
  }

  std::size_t bus(const std::string& node, Carrier c) {
    if (std::find(nodes_.begin(), nodes_.end(), node) == nodes_.end())
      throw Error(ErrorCode::InvalidTopology, "city '" + city_.name + "' has no district '" + node + "'");
    auto key = std::make_pair(node, c);
    auto it = h_.buses.find(key);
    if (it != h_.buses.end()) return it->second;
    std::size_t b = builder_.add_bus(prefix_ + "/bal/" + node + "/" + std::string(carrier_name(c)), c);
    h_.buses[key] = b;
    double imp = kInf, exp = kInf;
    for (auto& s : city_.slack)
      if (s.carrier == c) {
        imp = s.import_capacity;
        exp = s.export_capacity;
      }
    auto g = add_grid(builder_, prefix_ + "/" + node + "/slack_" + std::string(carrier_name(c)), c, imp, exp);
    builder_.attach(g, "io", b, true, exp > 0.0);
    return b;
  }

  void add_plants_and_links() {
    for (const auto& p : city_.plants) {
      auto block = with_context("plant '" + p.spec.name + "'", [&] {
        return builder_.add_component(p.spec, effective_mode(p.spec, Mode::Sizing), prefix_ + "/" + p.node + "/" + p.spec.name);
      });
      attach_all(builder_, block, p.spec, [&](Carrier c) { return bus(p.node, c); });
    }
    const std::size_t T = builder_.model().horizon.steps;
    for (std::size_t i = 0; i < city_.links.size(); ++i) {
      const auto& l = city_.links[i];
      if (!(l.capacity_kw >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "link " + std::to_string(i) + " needs a non-negative capacity");
      std::size_t from = bus(l.from, l.carrier), to = bus(l.to, l.carrier);
      std::vector<VariableId> fwd, bwd;
      for (std::size_t t = 0; t < T; ++t) {
        std::string base = prefix_ + "/link/" + std::to_string(i);
        auto f = builder_.problem().add_variable(base + "/" + std::to_string(t), 0.0, l.capacity_kw);
        builder_.add_to_bus(from, t, LinearExpression(f, -1.0));
        builder_.add_to_bus(to, t, LinearExpression(f, 1.0));
        fwd.push_back(f);
        if (l.bidirectional) {
          auto r = builder_.problem().add_variable(base + "/rev/" + std::to_string(t), 0.0, l.capacity_kw);
          builder_.add_to_bus(from, t, LinearExpression(r, 1.0));
          builder_.add_to_bus(to, t, LinearExpression(r, -1.0));
          bwd.push_back(r);
        }
      }
      h_.forward.push_back(std::move(fwd));
      h_.backward.push_back(std::move(bwd));
    }
  }

  const CityHandles& handles() const { return h_; }

 private:
  NetworkBuilder& builder_;
  const CityModel& city_;
  std::string prefix_;
  std::vector<std::string> nodes_;
  CityHandles h_;
};

MonolithicResult solve_reference(NetworkModel model, const ObjectiveSpec& objective, const CostParameters& cost,
                                 const ProfileMap& profiles, const MilpOptions& options) {
  MonolithicResult r;
  r.built = build_objective(objective, model, cost, profiles);
  model.problem.set_objective(r.built.expr, r.built.sense);
  r.solution = solve_checked(model.problem, options);
  r.objective = r.solution.objective;
  r.model = std::make_shared<const NetworkModel>(std::move(model));
  return r;
}

}  // namespace

LevelResult optimize_prosumer(const ProsumerTopology& topology, const Horizon& horizon, Mode mode,
                              const ObjectiveSpec& objective, const CostParameters& cost,
                              const ProfileMap& profiles, const MilpOptions& options) {
  return with_context("prosumer '" + topology.name + "'", [&] {
    auto model = assemble_model(topology, horizon, mode, profiles, "L1");
    auto obj = build_objective(objective, model, cost, profiles);
    model.problem.set_objective(obj.expr, obj.sense);
    auto s = solve_checked(model.problem, options);
    return package("prosumer", topology.name, std::move(model), std::move(s), "L1/" + topology.name);
  });
}

LevelResult optimize_district(const DistrictModel& district, const Horizon& horizon,
                              const ObjectiveSpec& objective, const CostParameters& cost,
                              const ProfileMap& profiles, const MilpOptions& options) {
  return with_context("district '" + district.name + "'", [&] {
    const std::string prefix = "L2/" + district.name;
    NetworkBuilder builder(horizon, profiles);
    add_district(builder, district, prefix, Mode::Operation, true, nullptr);
    auto model = builder.finish();
    auto obj = build_objective(objective, model, cost, profiles);
    model.problem.set_objective(obj.expr, obj.sense);
    auto s = solve_checked(model.problem, options);
    auto r = package("district", district.name, std::move(model), std::move(s), prefix);
    for (const auto& m : district.members) {
      if (!m.level1) continue;
      for (const auto& [key, before] : m.level1->dispatch) {
        auto it = r.dispatch.find(m.topology.name + "/" + key);
        if (it == r.dispatch.end()) continue;
        std::vector<double> delta(before.size());
        for (std::size_t t = 0; t < delta.size(); ++t) delta[t] = it->second[t] - before[t];
        r.deltas[it->first] = std::move(delta);
      }
    }
    return r;
  });
}

DistrictRun run_district(DistrictModel district, const Horizon& horizon, Mode mode,
                         const ObjectiveSpec& objective, const CostParameters& cost,
                         const ProfileMap& profiles, const MilpOptions& options) {
  DistrictRun run;
  std::vector<std::future<LevelResult>> pending;
  for (const auto& m : district.members)
    pending.push_back(std::async(std::launch::async, [&, topo = m.topology] {
      return optimize_prosumer(topo, horizon, mode, objective, cost, profiles, options);
    }));
  std::vector<std::exception_ptr> errors;
  for (auto& f : pending) {
    try {
      run.prosumers.push_back(f.get());
    } catch (...) {
      errors.push_back(std::current_exception());
    }
  }
  if (!errors.empty()) {
    try {
      std::rethrow_exception(errors.front());
    } catch (const Error& e) {
      throw e.with_context("district '" + district.name + "'");
    }
  }
  for (std::size_t i = 0; i < district.members.size(); ++i) {
    auto& m = district.members[i];
    auto l1 = std::make_shared<const LevelResult>(run.prosumers[i]);
    if (!m.frozen) m.frozen = capacities_by_component(*l1);
    m.level1 = l1;
  }
  run.district = optimize_district(district, horizon, objective, cost, profiles, options);
  return run;
}

LevelResult optimize_city(const CityModel& city, const std::vector<CityNode>& nodes, const Horizon& horizon,
                          const ObjectiveSpec& objective, const CostParameters& cost,
                          const ProfileMap& profiles, const MilpOptions& options) {
  return with_context("city '" + city.name + "'", [&] {
    const std::string prefix = "L3/" + city.name;
    NetworkBuilder builder(horizon, profiles);
    std::vector<std::string> names;
    for (auto& n : nodes) names.push_back(n.name);
    CityNetwork net(builder, city, prefix, names);
    const std::size_t T = horizon.steps;
    for (const auto& n : nodes) {
      for (const auto& [c, r] : n.residual_load) {
        if (r.size() != T)
          throw Error(ErrorCode::HorizonMismatch, "residual load of '" + n.name + "' does not match the horizon");
        std::size_t b = net.bus(n.name, c);
        for (std::size_t t = 0; t < T; ++t) builder.add_to_bus(b, t, LinearExpression(-r[t]));
        if (n.flexibility_kw > 0.0) {
          LinearExpression neutral;
          for (std::size_t t = 0; t < T; ++t) {
            auto v = builder.problem().add_variable(
                prefix + "/" + n.name + "/flex_" + std::string(carrier_name(c)) + "/" + std::to_string(t),
                -n.flexibility_kw, n.flexibility_kw);
            builder.add_to_bus(b, t, LinearExpression(v));
            neutral.add(v, horizon.weight(t));
          }
          builder.problem().add_constraint(prefix + "/" + n.name + "/flex_" + std::string(carrier_name(c)) + "/sum",
                                           neutral, Relation::Equal, 0.0);
        }
      }
    }
    net.add_plants_and_links();
    auto handles = net.handles();
    auto model = builder.finish();
    auto obj = build_objective(objective, model, cost, profiles);
    model.problem.set_objective(obj.expr, obj.sense);
    auto s = solve_checked(model.problem, options);
    auto values = s.values;
    auto r = package("city", city.name, std::move(model), std::move(s), prefix);
    for (std::size_t i = 0; i < handles.forward.size(); ++i) {
      auto flow = series(handles.forward[i], values);
      if (!handles.backward[i].empty()) {
        auto back = series(handles.backward[i], values);
        for (std::size_t t = 0; t < flow.size(); ++t) flow[t] -= back[t];
      }
      r.dispatch["link/" + std::to_string(i)] = std::move(flow);
    }
    return r;
  });
}

CityRun run_city(const CityModel& city, const Horizon& horizon, Mode mode, const ObjectiveSpec& objective,
                 const CostParameters& cost, const ProfileMap& profiles, const MilpOptions& options) {
  CityRun run;
  std::vector<CityNode> nodes;
  for (const auto& d : city.districts) {
    run.districts.push_back(with_context("city '" + city.name + "'", [&] {
      return run_district(d, horizon, mode, objective, cost, profiles, options);
    }));
    CityNode n;
    n.name = d.name;
    n.residual_load = run.districts.back().district.residual_load;
    auto it = city.flexibility_kw.find(d.name);
    if (it != city.flexibility_kw.end()) n.flexibility_kw = it->second;
    nodes.push_back(std::move(n));
  }
  run.city = optimize_city(city, nodes, horizon, objective, cost, profiles, options);
  return run;
}

MonolithicResult monolithic_reference(const ProsumerTopology& prosumer, const Horizon& horizon, Mode mode,
                                      const ObjectiveSpec& objective, const CostParameters& cost,
                                      const ProfileMap& profiles, const MilpOptions& options) {
  return solve_reference(assemble_model(prosumer, horizon, mode, profiles, "L1"), objective, cost, profiles, options);
}

MonolithicResult monolithic_reference(const DistrictModel& district, const Horizon& horizon, Mode mode,
                                      const ObjectiveSpec& objective, const CostParameters& cost,
                                      const ProfileMap& profiles, const MilpOptions& options) {
  NetworkBuilder builder(horizon, profiles);
  add_district(builder, district, "L2/" + district.name, mode, false, nullptr);
  return solve_reference(builder.finish(), objective, cost, profiles, options);
}

MonolithicResult monolithic_reference(const CityModel& city, const Horizon& horizon, Mode mode,
                                      const ObjectiveSpec& objective, const CostParameters& cost,
                                      const ProfileMap& profiles, const MilpOptions& options) {
  NetworkBuilder builder(horizon, profiles);
  std::vector<std::string> names;
  for (auto& d : city.districts) names.push_back(d.name);
  CityNetwork net(builder, city, "L3/" + city.name, names);
  for (const auto& d : city.districts) {
    BusFor up = [&](Carrier c) { return net.bus(d.name, c); };
    add_district(builder, d, "L2/" + d.name, mode, false, &up);
  }
  net.add_plants_and_links();
  return solve_reference(builder.finish(), objective, cost, profiles, options);
}

double bottom_up_objective(const MonolithicResult& reference, const std::vector<const LevelResult*>& levels) {
  const auto& vars = reference.model->problem.variables();
  std::vector<double> x(vars.size());
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const std::string& name = vars[j].name;
    bool found = false;
    for (const LevelResult* level : levels) {
      if (auto id = level->model->problem.find_variable(name)) {
        x[j] = level->values[id->index];
        found = true;
        break;
      }
      if (name.size() > 4 && name.compare(name.size() - 4, 4, "/cap") == 0) {
        if (const auto* b = level->model->find_block(name.substr(0, name.size() - 4))) {
          x[j] = b->capacity_value(level->values);
          found = true;
          break;
        }
      }
    }
    if (!found) throw Error(ErrorCode::InvalidArgument, "no hierarchical value for '" + name + "'");
  }
  return reference.built.expr.evaluate(x);
}

}  // namespace mesopt
