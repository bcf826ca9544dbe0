#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mesopt/objectives.hpp"

namespace mesopt {

/// Solved model of one level, with series keyed by owner relative to the
/// level (e.g. "pv/p_out" for a prosumer, "home/pv/p_out" in a district).
struct LevelResult {
  std::string level;  // "prosumer", "district" or "city"
  std::string name;
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  double gap = 0.0;
  std::size_t nodes = 0;
  std::size_t lp_iterations = 0;
  std::map<std::string, double> capacities;  // finite capacities of every non-demand block
  std::map<std::string, std::vector<double>> dispatch;
  /// Net exchange with the outside per carrier, import positive (kW).
  std::map<Carrier, std::vector<double>> residual_load;
  /// District only: change of each member flow against its prosumer-level dispatch.
  std::map<std::string, std::vector<double>> deltas;
  std::shared_ptr<const NetworkModel> model;
  std::vector<double> values;
};

using ProsumerResult = LevelResult;

/// Assembles, solves and packages one prosumer. Throws Infeasible or
/// Unbounded naming the prosumer.
LevelResult optimize_prosumer(const ProsumerTopology& topology, const Horizon& horizon, Mode mode,
                              const ObjectiveSpec& objective, const CostParameters& cost,
                              const ProfileMap& profiles, const MilpOptions& options = {});

struct DistrictGrid {
  Carrier carrier = Carrier::Electricity;
  double import_capacity = kInf;  // kW
  double export_capacity = kInf;  // kW, 0 forbids export
};

struct DistrictMember {
  ProsumerTopology topology;
  /// Capacities fixed at the prosumer level, by component name.
  std::optional<std::map<std::string, double>> frozen;
  /// Prosumer-level result, used for dispatch deltas.
  std::shared_ptr<const LevelResult> level1;
};

struct DistrictModel {
  std::string name;
  std::vector<DistrictMember> members;
  std::vector<ComponentSpec> central;  // attached to the district bus of their carriers
  /// Shared grids; carriers used by member grids but missing here get an
  /// unlimited grid that exports when any member grid does.
  std::vector<DistrictGrid> grids;
  std::optional<double> peak_import_limit;  // kW on the electricity grid
};

/// One joint operation problem over all members (frozen capacities), central
/// assets and the district grids. Throws FrozenCapacityMissing.
LevelResult optimize_district(const DistrictModel& district, const Horizon& horizon,
                              const ObjectiveSpec& objective, const CostParameters& cost,
                              const ProfileMap& profiles, const MilpOptions& options = {});

struct DistrictRun {
  std::vector<LevelResult> prosumers;
  LevelResult district;
};

/// Prosumer level (members solved concurrently), then the district with the
/// sizes frozen.
DistrictRun run_district(DistrictModel district, const Horizon& horizon, Mode mode,
                         const ObjectiveSpec& objective, const CostParameters& cost,
                         const ProfileMap& profiles, const MilpOptions& options = {});

struct CityNode {
  std::string name;
  std::map<Carrier, std::vector<double>> residual_load;  // kW, import positive
  /// Per-step shift the district may offer (kW); shifts are energy neutral.
  double flexibility_kw = 0.0;
};

struct Interconnection {
  std::string from;
  std::string to;
  Carrier carrier = Carrier::Electricity;
  double capacity_kw = 0.0;
  bool bidirectional = false;
};

struct CentralPlant {
  std::string node;
  ComponentSpec spec;
};

struct SlackGrid {
  Carrier carrier = Carrier::Electricity;
  double import_capacity = kInf;
  double export_capacity = kInf;
};

struct CityModel {
  std::string name;
  std::vector<DistrictModel> districts;
  std::map<std::string, double> flexibility_kw;  // by district
  std::vector<Interconnection> links;
  std::vector<CentralPlant> plants;
  /// External supply at every node; carriers not listed are unlimited both ways.
  std::vector<SlackGrid> slack;
};

/// Transport model over the district nodes.
LevelResult optimize_city(const CityModel& city, const std::vector<CityNode>& nodes,
                          const Horizon& horizon, const ObjectiveSpec& objective,
                          const CostParameters& cost, const ProfileMap& profiles,
                          const MilpOptions& options = {});

struct CityRun {
  std::vector<DistrictRun> districts;
  LevelResult city;
};

CityRun run_city(const CityModel& city, const Horizon& horizon, Mode mode,
                 const ObjectiveSpec& objective, const CostParameters& cost,
                 const ProfileMap& profiles, const MilpOptions& options = {});

/// The undecomposed problem: every prosumer sized and operated jointly with
/// the levels above it. Names match the hierarchical models.
struct MonolithicResult {
  MilpSolution solution;
  double objective = 0.0;
  std::shared_ptr<const NetworkModel> model;
  BuiltObjective built;
};

MonolithicResult monolithic_reference(const ProsumerTopology& prosumer, const Horizon& horizon,
                                      Mode mode, const ObjectiveSpec& objective,
                                      const CostParameters& cost, const ProfileMap& profiles,
                                      const MilpOptions& options = {});
MonolithicResult monolithic_reference(const DistrictModel& district, const Horizon& horizon,
                                      Mode mode, const ObjectiveSpec& objective,
                                      const CostParameters& cost, const ProfileMap& profiles,
                                      const MilpOptions& options = {});
MonolithicResult monolithic_reference(const CityModel& city, const Horizon& horizon, Mode mode,
                                      const ObjectiveSpec& objective, const CostParameters& cost,
                                      const ProfileMap& profiles, const MilpOptions& options = {});

/// Objective of the monolithic problem evaluated at the hierarchical
/// solution, which is one of its feasible points. Values are matched by
/// variable name; capacities fixed at a lower level are read from its blocks.
double bottom_up_objective(const MonolithicResult& reference,
                           const std::vector<const LevelResult*>& levels);

}  // namespace mesopt
