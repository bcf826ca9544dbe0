#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mesopt/simplex.hpp"
#include "mesopt/topology.hpp"

namespace mesopt {

enum class ObjectiveKind { Annuity, OperatingCost, CO2, SelfConsumption, Custom };

std::string_view objective_kind_name(ObjectiveKind kind);
std::optional<ObjectiveKind> parse_objective_kind(std::string_view name);

/// Custom objectives are minimized weighted sums of named quantities:
///   <component>.capacity / .import / .export / .generation / .input /
///   .output / .charge / .discharge / .demand   (energies in kWh)
///   annuity, operating_cost, co2, self_consumption
/// Component names match a block's scenario name or qualified owner suffix;
/// every matching block contributes.
struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::OperatingCost;
  std::map<std::string, double> custom_terms;
};

/// A price given either as a constant or by the name of a profile.
struct PriceSeries {
  double scalar = 0.0;
  std::optional<std::string> profile;

  double at(std::size_t t, const ProfileMap& profiles) const;
};

struct CostParameters {
  double interest_rate = 0.0;
  std::map<Carrier, PriceSeries> import_price;         // per kWh
  std::map<Carrier, PriceSeries> export_remuneration;  // per kWh, 0 when absent
  std::map<Carrier, double> co2_factor;                // kg per kWh imported
};

/// Capital recovery factor i(1+i)^n / ((1+i)^n - 1), or 1/n without interest.
double annuity_factor(double interest_rate, int lifetime_years);

struct BuiltObjective {
  LinearExpression expr;
  Sense sense = Sense::Minimize;
};

BuiltObjective build_objective(const ObjectiveSpec& spec, const NetworkModel& model,
                               const CostParameters& cost, const ProfileMap& profiles);

struct ParetoPoint {
  double objective_a = 0.0;
  double objective_b = 0.0;
  MilpSolution solution;
};

/// Epsilon-constraint front of two minimized expressions over `base`.
std::vector<ParetoPoint> pareto_front(const MilpProblem& base, const LinearExpression& a,
                                      const LinearExpression& b, std::size_t n_points,
                                      const MilpOptions& options = {});

/// Front of two objective specs; maximized objectives are traded as their
/// negation and reported with their own sign.
std::vector<ParetoPoint> generate_pareto_front(const NetworkModel& model, const ObjectiveSpec& a,
                                               const ObjectiveSpec& b, std::size_t n_points,
                                               const CostParameters& cost,
                                               const ProfileMap& profiles,
                                               const MilpOptions& options = {});

}  // namespace mesopt
