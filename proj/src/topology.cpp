#include "mesopt/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mesopt {

std::string_view violation_kind_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateName: return "duplicate-name";
    case ViolationKind::UnknownReference: return "unknown-reference";
    case ViolationKind::InvalidComponent: return "invalid-component";
    case ViolationKind::CarrierMismatch: return "carrier-mismatch";
    case ViolationKind::PortAttachment: return "port-attachment";
    case ViolationKind::Direction: return "direction";
    case ViolationKind::UnreachableDemand: return "unreachable-demand";
  }
  return "unknown";
}

Mode effective_mode(const ComponentSpec& spec, Mode model_mode) {
  if (model_mode == Mode::Operation) return Mode::Operation;
  if (spec.mode) return *spec.mode;
  return spec.capacity ? Mode::Operation : Mode::Sizing;
}

namespace {

struct PortInfo {
  std::string port;
  std::optional<Carrier> carrier;
  bool injects = false;    // must be able to push into its bus
  bool withdraws = false;  // must be able to draw from its bus
};

std::vector<PortInfo> ports_of(const ComponentSpec& spec) {
  switch (spec.archetype) {
    case Archetype::Generator: return {{"out", spec.carrier_out, true, false}};
    case Archetype::Demand: return {{"in", spec.carrier_in, false, true}};
    case Archetype::Converter:
      return {{"in", spec.carrier_in, false, true}, {"out", spec.carrier_out, true, false}};
    case Archetype::Storage:
    case Archetype::GridConnection: {
      std::optional<Carrier> c = spec.carrier_out ? spec.carrier_out : spec.carrier_in;
      return {{"io", c, false, false}};
    }
  }
  return {};
}

struct Attachment {
  std::size_t component = 0;
  std::string port;
  std::size_t bus = 0;
  bool inject = false;
  bool withdraw = false;
};

struct Wiring {
  std::vector<Bus> buses;  // explicit buses first, then implicit ones
  std::vector<Attachment> attachments;
};

class Resolver {
 public:
  Resolver(const ProsumerTopology& topo, std::vector<Violation>& report)
      : topo_(topo), report_(report) {}

  Wiring run() {
    check_names();
    wiring_.buses = topo_.buses;
    for (std::size_t i = 0; i < topo_.links.size(); ++i) resolve_link(i, false);
    for (std::size_t i = 0; i < topo_.links.size(); ++i) resolve_link(i, true);
    check_ports();
    check_reachability();
    return wiring_;
  }

 private:
  struct Ref {
    bool is_bus = false;
    std::size_t index = 0;  // bus or component index
    std::string port;
  };

  void add(ViolationKind kind, std::string message) { report_.push_back({kind, std::move(message)}); }

  void check_names() {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < topo_.components.size(); ++i) {
      const auto& c = topo_.components[i];
      if (!seen.insert(c.name).second)
        add(ViolationKind::DuplicateName, "component name '" + c.name + "' is used twice");
      component_index_.emplace(c.name, i);
      for (auto& issue : validate_spec(c)) add(ViolationKind::InvalidComponent, issue);
    }
    std::set<std::string> bus_seen;
    for (std::size_t i = 0; i < topo_.buses.size(); ++i) {
      const auto& b = topo_.buses[i];
      if (!bus_seen.insert(b.name).second)
        add(ViolationKind::DuplicateName, "bus name '" + b.name + "' is used twice");
      else if (seen.count(b.name))
        add(ViolationKind::DuplicateName, "bus '" + b.name + "' shares its name with a component");
      bus_index_.emplace(b.name, i);
    }
  }

  std::optional<Ref> lookup(const Endpoint& e, bool is_source, std::size_t link) {
    if (auto it = bus_index_.find(e.name); it != bus_index_.end() && e.port.empty())
      return Ref{true, it->second, ""};
    auto it = component_index_.find(e.name);
    if (it == component_index_.end()) {
      add(ViolationKind::UnknownReference,
          "link " + std::to_string(link) + " references unknown bus or component '" + e.name + "'");
      return std::nullopt;
    }
    const auto& spec = topo_.components[it->second];
    auto ports = ports_of(spec);
    std::string port = e.port;
    if (port.empty()) {
      if (ports.size() == 1)
        port = ports.front().port;
      else
        port = is_source ? "out" : "in";
    }
    bool known = std::any_of(ports.begin(), ports.end(), [&](auto& p) { return p.port == port; });
    if (!known) {
      add(ViolationKind::UnknownReference,
          "component '" + spec.name + "' has no port '" + port + "'");
      return std::nullopt;
    }
    return Ref{false, it->second, port};
  }

  PortInfo port_info(const Ref& r) const {
    for (auto& p : ports_of(topo_.components[r.index]))
      if (p.port == r.port) return p;
    return {};
  }

  std::string port_label(const Ref& r) const { return topo_.components[r.index].name + "." + r.port; }

  Attachment* find_attachment(const Ref& r) {
    for (auto& a : wiring_.attachments)
      if (a.component == r.index && a.port == r.port) return &a;
    return nullptr;
  }

  void attach(const Ref& port, std::size_t bus, bool inject, bool withdraw) {
    const auto& spec = topo_.components[port.index];
    const auto info = port_info(port);
    const auto& b = wiring_.buses[bus];
    if (info.carrier && *info.carrier != b.carrier)
      add(ViolationKind::CarrierMismatch,
          "port " + port_label(port) + " carries " + std::string(carrier_name(*info.carrier)) +
              " but bus '" + b.name + "' carries " + std::string(carrier_name(b.carrier)));
    if (spec.archetype == Archetype::GridConnection && withdraw && !spec.bidirectional)
      add(ViolationKind::Direction,
          "grid connection '" + spec.name + "' is not bidirectional and cannot export from bus '" + b.name + "'");
    if (Attachment* a = find_attachment(port)) {
      if (a->bus != bus) {
        add(ViolationKind::PortAttachment, "port " + port_label(port) + " is attached to buses '" +
                                               wiring_.buses[a->bus].name + "' and '" + b.name + "'");
        return;
      }
      a->inject = a->inject || inject;
      a->withdraw = a->withdraw || withdraw;
      return;
    }
    if (info.injects && !inject)
      add(ViolationKind::Direction, "port " + port_label(port) + " can only feed into bus '" + b.name + "'");
    if (info.withdraws && !withdraw)
      add(ViolationKind::Direction, "port " + port_label(port) + " can only draw from bus '" + b.name + "'");
    wiring_.attachments.push_back({port.index, port.port, bus, inject && !info.withdraws,
                                   withdraw && !info.injects});
  }

  void resolve_link(std::size_t i, bool port_to_port_pass) {
    const FlowLink& link = topo_.links[i];
    auto from = lookup_quiet(link.from, true, i, port_to_port_pass);
    auto to = lookup_quiet(link.to, false, i, port_to_port_pass);
    if (!from || !to) return;
    bool p2p = !from->is_bus && !to->is_bus;
    if (p2p != port_to_port_pass) return;
    if (from->is_bus && to->is_bus) {
      add(ViolationKind::PortAttachment,
          "link " + std::to_string(i) + " joins two buses '" + link.from.name + "' and '" + link.to.name + "'");
      return;
    }
    auto bidirectional = [&](const Ref& r) { return r.is_bus || topo_.components[r.index].bidirectional; };
    if (!link.directed && !(bidirectional(*from) && bidirectional(*to))) {
      add(ViolationKind::Direction, "link " + std::to_string(i) + " (" + link.from.label() + " - " +
                                        link.to.label() + ") is undirected but an endpoint is not bidirectional");
      return;
    }
    if (!p2p) {
      // Port-bus link: flow from -> to, or both ways when undirected.
      if (from->is_bus)
        attach(*to, from->index, !link.directed, true);
      else
        attach(*from, to->index, true, !link.directed);
      return;
    }
    // Port-to-port: share an existing bus of either port or create one.
    std::size_t bus;
    if (Attachment* a = find_attachment(*from))
      bus = a->bus;
    else if (Attachment* b = find_attachment(*to))
      bus = b->bus;
    else {
      auto c = port_info(*from).carrier;
      if (!c) return;  // reported as an invalid component
      bus = wiring_.buses.size();
      wiring_.buses.push_back({"link" + std::to_string(i), *c});
    }
    attach(*from, bus, true, !link.directed);
    attach(*to, bus, !link.directed, true);
  }

  // Reports unknown references once (on the first pass only).
  std::optional<Ref> lookup_quiet(const Endpoint& e, bool is_source, std::size_t link, bool second) {
    if (!second) return lookup(e, is_source, link);
    std::vector<Violation> sink;
    std::swap(sink, report_);
    auto r = lookup(e, is_source, link);
    std::swap(sink, report_);
    return r;
  }

  void check_ports() {
    for (std::size_t i = 0; i < topo_.components.size(); ++i)
      for (auto& p : ports_of(topo_.components[i]))
        if (!find_attachment(Ref{false, i, p.port}))
          add(ViolationKind::PortAttachment,
              "port " + topo_.components[i].name + "." + p.port + " is not attached to any bus");
  }

  void check_reachability() {
    for (auto& d : wiring_.attachments) {
      const auto& spec = topo_.components[d.component];
      if (spec.archetype != Archetype::Demand) continue;
      bool fed = std::any_of(wiring_.attachments.begin(), wiring_.attachments.end(), [&](auto& a) {
        return a.bus == d.bus && a.inject &&
               topo_.components[a.component].archetype != Archetype::Demand;
      });
      if (!fed)
        add(ViolationKind::UnreachableDemand,
            "demand '" + spec.name + "' on bus '" + wiring_.buses[d.bus].name +
                "' has no generator, converter, storage or grid feeding it");
    }
  }

  const ProsumerTopology& topo_;
  std::vector<Violation>& report_;
  Wiring wiring_;
  std::map<std::string, std::size_t> component_index_;
  std::map<std::string, std::size_t> bus_index_;
};

}  // namespace

std::vector<Violation> validate_topology(const ProsumerTopology& topology) {
  std::vector<Violation> report;
  Resolver(topology, report).run();
  return report;
}

const ComponentBlock* NetworkModel::find_block(std::string_view owner) const {
  for (auto& b : blocks)
    if (b.owner == owner) return &b;
  return nullptr;
}

std::size_t NetworkModel::block_index(std::string_view owner) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].owner == owner) return i;
  throw Error(ErrorCode::InvalidArgument, "no component block '" + std::string(owner) + "'");
}

double NetworkModel::max_balance_residual(const std::vector<double>& values) const {
  double worst = 0.0;
  for (auto& bus : buses)
    for (auto& e : bus.net) worst = std::max(worst, std::abs(e.evaluate(values)));
  return worst;
}

double NetworkModel::max_storage_residual(const std::vector<double>& values) const {
  double worst = 0.0;
  const double dt = horizon.dt_hours;
  const std::size_t L = horizon.period_len();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    if (b.archetype != Archetype::Storage) continue;
    const auto& spec = specs[k];
    for (std::size_t p = 0; p < b.soc.size(); ++p) {
      const auto& s = b.soc[p];
      for (std::size_t j = 0; j < L; ++j) {
        std::size_t t = p * L + j;
        double r = values[s[j + 1].index] - values[s[j].index] -
                   spec.charge_efficiency * dt * values[b.charge[t].index] +
                   dt / spec.discharge_efficiency * values[b.discharge[t].index];
        worst = std::max(worst, std::abs(r));
      }
      worst = std::max(worst, std::abs(values[s[L].index] - values[s[0].index]));
    }
  }
  return worst;
}

NetworkBuilder::NetworkBuilder(Horizon horizon, const ProfileMap& profiles) : profiles_(profiles) {
  horizon.validate();
  model_.horizon = std::move(horizon);
}

std::size_t NetworkBuilder::add_bus(std::string qualified_name, Carrier carrier) {
  BusRecord rec;
  rec.name = std::move(qualified_name);
  rec.carrier = carrier;
  rec.net.resize(model_.horizon.steps);
  model_.buses.push_back(std::move(rec));
  return model_.buses.size() - 1;
}

std::size_t NetworkBuilder::add_component(const ComponentSpec& spec, Mode mode, std::string owner) {
  auto block = emit_component_constraints(spec, model_.horizon, mode, model_.problem, profiles_, owner);
  model_.specs.push_back(spec);
  model_.blocks.push_back(std::move(block));
  model_.external.push_back(spec.archetype == Archetype::GridConnection);
  return model_.blocks.size() - 1;
}

void NetworkBuilder::attach(std::size_t block, std::string_view port, std::size_t bus,
                            bool allow_inject, bool allow_withdraw) {
  const ComponentBlock& b = model_.blocks.at(block);
  auto& net = model_.buses.at(bus).net;
  auto& problem = model_.problem;
  auto fix_zero = [&](const std::vector<VariableId>& vars) {
    for (auto v : vars) problem.set_bounds(v, 0.0, 0.0);
  };
  auto add_flow = [&](const std::vector<VariableId>& vars, double sign) {
    for (std::size_t t = 0; t < vars.size(); ++t) net[t].add(vars[t], sign);
  };
  switch (b.archetype) {
    case Archetype::Generator: add_flow(b.output, 1.0); break;
    case Archetype::Demand: add_flow(b.input, -1.0); break;
    case Archetype::Converter:
      if (port == "in")
        add_flow(b.input, -1.0);
      else
        add_flow(b.output, 1.0);
      break;
    case Archetype::Storage:
      add_flow(b.discharge, 1.0);
      add_flow(b.charge, -1.0);
      if (!allow_inject) fix_zero(b.discharge);
      if (!allow_withdraw) fix_zero(b.charge);
      break;
    case Archetype::GridConnection:
      add_flow(b.imports, 1.0);
      add_flow(b.exports, -1.0);
      if (!allow_inject) fix_zero(b.imports);
      if (!allow_withdraw) fix_zero(b.exports);
      break;
  }
}

void NetworkBuilder::attach_upstream(std::size_t block, std::size_t bus) {
  const ComponentBlock& b = model_.blocks.at(block);
  if (b.archetype != Archetype::GridConnection)
    throw Error(ErrorCode::InvalidTopology, "only grid connections attach upstream");
  auto& net = model_.buses.at(bus).net;
  for (std::size_t t = 0; t < b.imports.size(); ++t) net[t].add(b.imports[t], -1.0);
  for (std::size_t t = 0; t < b.exports.size(); ++t) net[t].add(b.exports[t], 1.0);
  model_.external[block] = false;
}

void NetworkBuilder::add_to_bus(std::size_t bus, std::size_t t, const LinearExpression& injection) {
  model_.buses.at(bus).net.at(t) += injection;
}

NetworkModel NetworkBuilder::finish() {
  for (auto& bus : model_.buses) {
    bus.rows.clear();
    for (std::size_t t = 0; t < bus.net.size(); ++t) {
      LinearExpression e = bus.net[t];
      double rhs = -e.constant();
      e.add_constant(-e.constant());
      bus.rows.push_back(model_.problem.add_constraint(bus.name + "/" + std::to_string(t), e,
                                                       Relation::Equal, rhs));
    }
  }
  return std::move(model_);
}

std::vector<std::size_t> add_topology(NetworkBuilder& builder, const ProsumerTopology& topology,
                                      Mode mode, const std::string& owner_prefix,
                                      const std::map<std::string, double>* frozen) {
  std::vector<Violation> report;
  Wiring wiring = Resolver(topology, report).run();
  if (!report.empty()) {
    std::string msg = "prosumer '" + topology.name + "' has an invalid topology:";
    for (auto& v : report) msg += "\n  [" + std::string(violation_kind_name(v.kind)) + "] " + v.message;
    throw Error(ErrorCode::InvalidTopology, msg);
  }

  std::vector<std::size_t> blocks;
  for (const auto& original : topology.components) {
    ComponentSpec spec = original;
    Mode m = effective_mode(spec, mode);
    if (frozen && spec.archetype != Archetype::Demand) {
      auto it = frozen->find(spec.name);
      if (it != frozen->end()) {
        spec.capacity = it->second;
      } else if (m == Mode::Sizing || !spec.capacity) {
        throw Error(ErrorCode::FrozenCapacityMissing,
                    "no frozen capacity for component '" + spec.name + "' of prosumer '" +
                        topology.name + "'");
      }
      m = Mode::Operation;
    }
    blocks.push_back(builder.add_component(spec, m, owner_prefix + "/" + spec.name));
  }

  std::vector<std::size_t> bus_ids;
  for (auto& b : wiring.buses) bus_ids.push_back(builder.add_bus(owner_prefix + "/bal/" + b.name, b.carrier));
  for (auto& a : wiring.attachments)
    builder.attach(blocks[a.component], a.port, bus_ids[a.bus], a.inject, a.withdraw);
  bus_ids.resize(topology.buses.size());
  return bus_ids;
}

NetworkModel assemble_model(const ProsumerTopology& topology, const Horizon& horizon, Mode mode,
                            const ProfileMap& profiles, std::string_view level_prefix) {
  for (auto& c : topology.components)
    if (c.archetype == Archetype::Demand && !c.profile)
      throw Error(ErrorCode::MissingProfile, "demand '" + c.name + "' has no profile");
  NetworkBuilder builder(horizon, profiles);
  add_topology(builder, topology, mode, std::string(level_prefix) + "/" + topology.name);
  return builder.finish();
}

}  // namespace mesopt
