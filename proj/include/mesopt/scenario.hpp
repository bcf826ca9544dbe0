#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mesopt/aggregation.hpp"
#include "mesopt/hierarchy.hpp"

namespace mesopt {

enum class Level { Prosumer, District, City };

std::string_view level_name(Level level);

struct AggregationSettings {
  std::size_t period_length = 24;
  std::size_t k = 1;
};

struct ParetoSettings {
  ObjectiveSpec second;  // traded against the main objective
  std::size_t points = 5;
};

struct ScenarioConfig {
  std::string name;
  std::filesystem::path source;  // the scenario file
  Level level = Level::Prosumer;
  Mode mode = Mode::Operation;
  Horizon horizon;
  std::string start = "2020-01-01T00:00:00";
  ObjectiveSpec objective;
  std::optional<ParetoSettings> pareto;
  CostParameters cost;
  std::optional<AggregationSettings> aggregation;
  MilpOptions solver;
  /// Also solve the monolithic reference and report the decomposition gap.
  bool reference = false;
  std::vector<std::filesystem::path> profile_files;  // resolved
  ProfileMap profiles;

  ProsumerTopology prosumer;  // level prosumer
  DistrictModel district;     // level district
  CityModel city;             // level city
};

/// Parses and validates a scenario document. Relative paths resolve against
/// the document's directory. Every schema violation is listed in one
/// SchemaError. Throws ParseError, SchemaError or MissingFile.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Topology violations of every prosumer and district in the tree, each
/// prefixed with its location.
std::vector<std::string> check_topologies(const ScenarioConfig& config);

struct ParetoRow {
  double objective_a = 0.0;
  double objective_b = 0.0;
  std::vector<std::pair<std::string, double>> capacities;  // sized blocks, model order
};

struct DecompositionReport {
  double monolithic = 0.0;
  double bottom_up = 0.0;
  double gap = 0.0;  // bottom_up - monolithic
};

/// Levels are ordered prosumers, districts, city. Series are on the original
/// horizon (expanded when aggregation was used).
struct ResultBundle {
  std::string scenario;
  Level level = Level::Prosumer;
  std::vector<std::string> timestamps;
  std::vector<LevelResult> levels;
  std::vector<std::string> labels;  // "L1/<prosumer>", "L2/<district>", "L3/<city>"
  std::vector<std::pair<std::string, std::vector<double>>> dispatch;
  std::vector<std::pair<std::string, std::vector<double>>> residual_load;
  std::vector<ParetoRow> pareto;
  std::optional<TypicalPeriodSet> aggregation;
  std::optional<DecompositionReport> decomposition;
  double wall_time_s = 0.0;  // not written to any file
};

ResultBundle run_scenario(const ScenarioConfig& config);

/// Largest balance and storage residuals over every level of the bundle.
std::pair<double, double> verify_balances(const ResultBundle& bundle);

/// Writes summary.json, dispatch.csv, residual_load.csv and, when present,
/// pareto.csv and aggregation.csv. Re-verifies balances first (1e-6) and
/// throws NumericalBreakdown if they fail. Returns the written paths.
std::vector<std::filesystem::path> write_results(const ResultBundle& bundle,
                                                 const std::filesystem::path& out_dir);

/// CPLEX-LP text of the configured level's problem. District and city
/// levels solve the levels below first to fix their inputs.
std::string export_scenario_lp(const ScenarioConfig& config);

}  // namespace mesopt
