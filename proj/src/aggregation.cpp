#include "mesopt/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace mesopt {

Horizon TypicalPeriodSet::horizon(double dt_hours) const {
  Horizon h;
  h.steps = medoids.size() * period_length;
  h.dt_hours = dt_hours;
  h.period_length = period_length;
  for (double w : weights) h.weights.insert(h.weights.end(), period_length, w);
  return h;
}

namespace {

double total_cost(const std::vector<std::vector<double>>& d, const std::vector<std::size_t>& medoids) {
  double cost = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto m : medoids) best = std::min(best, d[i][m]);
    cost += best;
  }
  return cost;
}

}  // namespace

Aggregation aggregate_series(const ProfileMap& profiles, std::size_t period_length, std::size_t k) {
  if (profiles.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to aggregate");
  if (period_length == 0) throw Error(ErrorCode::InvalidArgument, "period length must be positive");
  const std::size_t steps = profiles.begin()->second.size();
  for (const auto& [name, series] : profiles)
    if (series.size() != steps)
      throw Error(ErrorCode::HorizonMismatch, "profile '" + name + "' has " + std::to_string(series.size()) +
                                                  " values, expected " + std::to_string(steps));
  if (steps == 0 || steps % period_length != 0)
    throw Error(ErrorCode::IndivisibleLength, "series of " + std::to_string(steps) +
                                                  " steps cannot be cut into periods of " +
                                                  std::to_string(period_length));
  const std::size_t n = steps / period_length;
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "need at least one typical period");
  if (k > n)
    throw Error(ErrorCode::KTooLarge, std::to_string(k) + " typical periods requested but only " +
                                          std::to_string(n) + " periods exist");

  std::vector<std::vector<double>> features(n);
  for (const auto& [name, series] : profiles) {
    auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    const double span = *hi - *lo;
    for (std::size_t t = 0; t < steps; ++t)
      features[t / period_length].push_back(span > 0.0 ? (series[t] - *lo) / span : 0.0);
  }
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t f = 0; f < features[i].size(); ++f) {
        double diff = features[i][f] - features[j][f];
        s += diff * diff;
      }
      d[i][j] = d[j][i] = std::sqrt(s);
    }

  // Farthest-point seeding from period 0.
  std::vector<std::size_t> medoids{0};
  std::vector<double> nearest(d[0]);
  while (medoids.size() < k) {
    std::size_t pick = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(medoids.begin(), medoids.end(), i) != medoids.end()) continue;
      if (nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    }
    medoids.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d[pick][i]);
  }

  // Best-improvement swaps until no swap lowers the total distance.
  double cost = total_cost(d, medoids);
  for (;;) {
    double best = cost;
    std::size_t best_m = 0, best_o = 0;
    for (std::size_t m = 0; m < k; ++m)
      for (std::size_t o = 0; o < n; ++o) {
        if (std::find(medoids.begin(), medoids.end(), o) != medoids.end()) continue;
        auto trial = medoids;
        trial[m] = o;
        double c = total_cost(d, trial);
        if (c < best - 1e-12) {
          best = c;
          best_m = m;
          best_o = o;
        }
      }
    if (best >= cost - 1e-12) break;
    medoids[best_m] = best_o;
    cost = best;
  }
  std::sort(medoids.begin(), medoids.end());

  Aggregation out;
  auto& set = out.set;
  set.period_length = period_length;
  set.medoids = medoids;
  set.weights.assign(k, 0.0);
  set.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (d[i][medoids[c]] < d[i][medoids[best]]) best = c;
    set.assignment[i] = best;
    set.weights[best] += 1.0;
  }
  for (const auto& [name, series] : profiles) {
    auto& typical = out.profiles[name];
    for (auto m : medoids)
      typical.insert(typical.end(), series.begin() + m * period_length, series.begin() + (m + 1) * period_length);
  }
  return out;
}

std::vector<double> expand_series(const std::vector<double>& typical, const TypicalPeriodSet& set) {
  const std::size_t L = set.period_length;
  if (typical.size() != set.typical_periods() * L)
    throw Error(ErrorCode::HorizonMismatch, "series of " + std::to_string(typical.size()) +
                                                " steps does not cover " + std::to_string(set.typical_periods()) +
                                                " typical periods");
  std::vector<double> out;
  out.reserve(set.original_periods() * L);
  for (auto c : set.assignment) out.insert(out.end(), typical.begin() + c * L, typical.begin() + (c + 1) * L);
  return out;
}

double weighted_total(const std::vector<double>& per_typical_period, const TypicalPeriodSet& set) {
  if (per_typical_period.size() != set.typical_periods())
    throw Error(ErrorCode::HorizonMismatch, "one value per typical period expected");
  double total = 0.0;
  for (std::size_t c = 0; c < per_typical_period.size(); ++c) total += set.weights[c] * per_typical_period[c];
  return total;
}

}  // namespace mesopt
