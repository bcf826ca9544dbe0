#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mesopt/milp.hpp"

namespace mesopt {

enum class Carrier { Electricity, Heat, Cooling, Gas, Hydrogen };

std::string_view carrier_name(Carrier carrier);
std::optional<Carrier> parse_carrier(std::string_view name);
inline constexpr Carrier kAllCarriers[] = {Carrier::Electricity, Carrier::Heat, Carrier::Cooling,
                                           Carrier::Gas, Carrier::Hydrogen};

enum class Archetype { Generator, Storage, Converter, GridConnection, Demand };

std::string_view archetype_name(Archetype archetype);
std::optional<Archetype> parse_archetype(std::string_view name);

enum class Mode { Sizing, Operation };

/// Named time series (kW for demands, 0..1 availability for generators,
/// prices per kWh). All series used in one model share the horizon length.
using ProfileMap = std::map<std::string, std::vector<double>>;

/// Parameter set of one energy component. Storage and grid connections
/// carry a single carrier (set either carrier field; both may be set if
/// they agree).
struct ComponentSpec {
  std::string name;
  Archetype archetype = Archetype::Generator;
  std::optional<Carrier> carrier_in;
  std::optional<Carrier> carrier_out;
  /// kW, or kWh for storage. Absent means the optimizer sizes it.
  std::optional<double> capacity;
  /// Upper bound for a sized capacity.
  std::optional<double> max_capacity;
  double efficiency = 1.0;
  double charge_efficiency = 1.0;
  double discharge_efficiency = 1.0;
  double conversion_ratio = 1.0;
  /// Storage charge/discharge limit in kW; defaults to capacity per hour.
  std::optional<double> power_limit;
  /// Storage only: forbid simultaneous charge and discharge with binaries.
  bool exclusive_charging = false;
  double capex_per_unit = 0.0;
  double opex_per_unit_energy = 0.0;
  double co2_per_unit_energy = 0.0;
  int lifetime_years = 20;
  std::optional<std::string> profile;
  bool bidirectional = false;
  /// Per-component override of the model-wide mode.
  std::optional<Mode> mode;

  /// The single carrier of a Storage or GridConnection.
  Carrier carrier() const;
};

/// Parameter-level violations (empty when the spec is well formed).
std::vector<std::string> validate_spec(const ComponentSpec& spec);

/// Time discretization. With typical periods, `period_length` divides
/// `steps` and each step carries the weight of its period.
struct Horizon {
  std::size_t steps = 1;
  double dt_hours = 1.0;
  std::size_t period_length = 0;  // 0 means one period spanning the horizon
  std::vector<double> weights;    // per step; empty means all 1

  std::size_t period_len() const { return period_length == 0 ? steps : period_length; }
  std::size_t periods() const { return steps / period_len(); }
  double weight(std::size_t t) const { return weights.empty() ? 1.0 : weights[t]; }
  /// Hours represented by the horizon (weights included).
  double represented_hours() const;
  void validate() const;
};

/// Variables and rows one component contributed to a problem.
struct ComponentBlock {
  std::string owner;  // fully qualified, e.g. "L1/home/pv"
  std::string name;   // component name as written in the scenario
  Archetype archetype = Archetype::Generator;
  Mode mode = Mode::Operation;
  std::optional<VariableId> capacity_var;
  double fixed_capacity = 0.0;

  std::vector<VariableId> output;     // Generator, Converter
  std::vector<VariableId> input;      // Demand, Converter
  std::vector<VariableId> charge;     // Storage
  std::vector<VariableId> discharge;  // Storage
  std::vector<std::vector<VariableId>> soc;  // Storage, per period, length L+1
  std::vector<VariableId> imports;    // GridConnection
  std::vector<VariableId> exports;    // GridConnection (bidirectional only)
  std::vector<VariableId> mode_binary;  // Storage with exclusive charging
  std::vector<std::size_t> constraints;

  /// Capacity as an expression: the sizing variable or a constant.
  LinearExpression capacity_expr() const;
  double capacity_value(const std::vector<double>& values) const;
  /// Flows of the block in emission order, as (quantity, variables).
  std::vector<std::pair<std::string, const std::vector<VariableId>*>> flows() const;
};

/// Emits the block of one component. `owner` prefixes every name.
ComponentBlock emit_component_constraints(const ComponentSpec& spec, const Horizon& horizon,
                                          Mode mode, MilpProblem& problem,
                                          const ProfileMap& profiles, std::string_view owner);

}  // namespace mesopt
