#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mesopt/components.hpp"
#include "mesopt/milp.hpp"

namespace mesopt {

struct Bus {
  std::string name;
  Carrier carrier = Carrier::Electricity;
};

/// One end of a link: a bus, or a component port ("in", "out", "io").
struct Endpoint {
  std::string name;  // bus or component name
  std::string port;  // empty for buses and single-port components

  std::string label() const { return port.empty() ? name : name + "." + port; }
};

struct FlowLink {
  Endpoint from;
  Endpoint to;
  bool directed = true;
};

struct ProsumerTopology {
  std::string name;
  std::vector<ComponentSpec> components;
  std::vector<Bus> buses;
  std::vector<FlowLink> links;
};

enum class ViolationKind {
  DuplicateName,
  UnknownReference,
  InvalidComponent,
  CarrierMismatch,
  PortAttachment,
  Direction,
  UnreachableDemand,
};

std::string_view violation_kind_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Empty iff the topology is well formed.
std::vector<Violation> validate_topology(const ProsumerTopology& topology);

/// Mode a component runs in given the model-wide mode: operation-wide
/// models fix everything; sizing-wide models size only components that
/// carry no capacity (unless the component overrides its mode).
Mode effective_mode(const ComponentSpec& spec, Mode model_mode);

struct BusRecord {
  std::string name;  // qualified, used for row names
  Carrier carrier = Carrier::Electricity;
  std::vector<LinearExpression> net;  // per step: injections minus withdrawals (kW)
  std::vector<std::size_t> rows;
};

/// A problem assembled from components and buses, with enough bookkeeping
/// to build objectives and read results back.
struct NetworkModel {
  MilpProblem problem;
  Horizon horizon;
  std::vector<ComponentSpec> specs;    // parallel to blocks
  std::vector<ComponentBlock> blocks;
  std::vector<bool> external;          // grid connection to the outside world (priced)
  std::vector<BusRecord> buses;

  const ComponentBlock* find_block(std::string_view owner) const;
  std::size_t block_index(std::string_view owner) const;

  /// Largest |injections - withdrawals| over every bus and step.
  double max_balance_residual(const std::vector<double>& values) const;
  /// Largest storage dynamics or cyclic-closure residual in kWh.
  double max_storage_residual(const std::vector<double>& values) const;
};

/// Shared assembly machinery for every level of the hierarchy.
class NetworkBuilder {
 public:
  NetworkBuilder(Horizon horizon, const ProfileMap& profiles);

  std::size_t add_bus(std::string qualified_name, Carrier carrier);
  std::size_t add_component(const ComponentSpec& spec, Mode mode, std::string owner);

  /// Connects a component port to a bus. Flows the link does not allow are
  /// fixed to zero.
  void attach(std::size_t block, std::string_view port, std::size_t bus, bool allow_inject,
              bool allow_withdraw);
  /// Rewires a grid connection so it exchanges with `bus` (its upstream
  /// network) instead of the outside world: imports withdraw from the bus and
  /// exports inject into it.
  void attach_upstream(std::size_t block, std::size_t bus);

  /// Adds an extra flow term to a bus (used for fixed residual loads and
  /// transfer links at the upper levels).
  void add_to_bus(std::size_t bus, std::size_t t, const LinearExpression& injection);

  MilpProblem& problem() { return model_.problem; }
  const NetworkModel& model() const { return model_; }

  /// Emits one balance row per bus and step, then hands the model over.
  NetworkModel finish();

 private:
  NetworkModel model_;
  const ProfileMap& profiles_;
};

/// Builds the prosumer-level problem: component blocks followed by
/// |buses| x T balance rows. Throws InvalidTopology listing every violation.
NetworkModel assemble_model(const ProsumerTopology& topology, const Horizon& horizon, Mode mode,
                            const ProfileMap& profiles, std::string_view level_prefix = "L1");

/// Adds the blocks, buses and links of a topology into an existing builder
/// under `owner_prefix`. Returns the builder bus index for each topology bus.
std::vector<std::size_t> add_topology(NetworkBuilder& builder, const ProsumerTopology& topology,
                                      Mode mode, const std::string& owner_prefix,
                                      const std::map<std::string, double>* frozen = nullptr);

}  // namespace mesopt
