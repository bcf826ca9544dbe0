#pragma once

#include <cstddef>
#include <vector>

#include "mesopt/components.hpp"

namespace mesopt {

struct TypicalPeriodSet {
  std::size_t period_length = 1;
  std::vector<std::size_t> medoids;     // original period index per typical period, ascending
  std::vector<double> weights;          // original periods represented by each typical period
  std::vector<std::size_t> assignment;  // original period -> typical period

  std::size_t typical_periods() const { return medoids.size(); }
  std::size_t original_periods() const { return assignment.size(); }
  /// Horizon over the typical periods: storage closes per period and every
  /// step carries its period's weight.
  Horizon horizon(double dt_hours) const;
};

struct Aggregation {
  TypicalPeriodSet set;
  ProfileMap profiles;  // each series cut down to the medoid periods
};

/// k-medoids over periods with one shared assignment for all series. Each
/// series is min-max normalized; features are the concatenated periods in
/// name order.
Aggregation aggregate_series(const ProfileMap& profiles, std::size_t period_length, std::size_t k);

/// Maps a series over the typical periods back onto the original horizon.
std::vector<double> expand_series(const std::vector<double>& typical, const TypicalPeriodSet& set);

/// Weighted sum of per-typical-period totals.
double weighted_total(const std::vector<double>& per_typical_period, const TypicalPeriodSet& set);

}  // namespace mesopt
