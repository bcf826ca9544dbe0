#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "mesopt/milp.hpp"

namespace mesopt {

enum class SolveStatus {
  Optimal,
  Infeasible,
  Unbounded,
  /// Node limit reached with an incumbent whose gap exceeds the tolerance.
  Feasible,
};

std::string_view status_name(SolveStatus status);

struct LpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> values;  // indexed by VariableId; empty unless Optimal
  std::size_t iterations = 0;
};

struct MilpOptions {
  double rel_gap = 1e-6;
  std::size_t node_limit = 100000;
  double integrality_tol = 1e-6;
};

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> values;
  double gap = 0.0;
  std::size_t nodes_explored = 0;
  std::size_t lp_iterations = 0;
  /// LP bound of every node taken off the open list, in the problem's sense.
  std::vector<double> explored_bounds;

  bool has_solution() const {
    return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
  }
};

/// LP relaxation (integrality flags ignored). Throws NumericalBreakdown when
/// the basis cannot be factorized or no pivot above 1e-11 is available.
LpSolution solve_lp(const MilpProblem& problem);

/// Same as solve_lp but with replacement bounds for every variable.
LpSolution solve_lp(const MilpProblem& problem, const std::vector<double>& lower,
                    const std::vector<double>& upper);

/// Best-first branch-and-bound. Throws NodeLimitExceeded if the limit is hit
/// before any integer-feasible point is known.
MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options = {});

}  // namespace mesopt
