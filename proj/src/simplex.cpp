#include "mesopt/simplex.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <utility>

namespace mesopt {

std::string_view status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::Feasible: return "Feasible";
  }
  return "Unknown";
}

namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kBreakdownTol = 1e-11;
constexpr double kNoiseTol = 1e-14;
constexpr double kPhaseOneTol = 1e-7;
constexpr int kRefactorInterval = 64;
constexpr int kDegenerateSwitch = 50;

enum class ColState : std::uint8_t { Basic, AtLower, AtUpper, Free };

// Product-form update of the basis inverse: B_new^-1 = E * B_old^-1.
struct Eta {
  int row = 0;
  double pivot_inv = 0.0;
  std::vector<std::pair<int, double>> entries;  // i != row, value -alpha_i/alpha_r
};

enum class LoopResult { Optimal, Unbounded };

// Bounded primal simplex on  A x + s = b  with logical columns s and, when
// the all-logical start is infeasible, artificial columns removed after
// phase one. Pricing is Dantzig; after a run of degenerate pivots it falls
// back to Bland's rule until the objective strictly improves again.
class RevisedSimplex {
 public:
  RevisedSimplex(const MilpProblem& problem, const std::vector<double>& lower,
                 const std::vector<double>& upper)
      : problem_(problem) {
    build(lower, upper);
  }

  LpSolution run() {
    LpSolution out;
    if (trivially_infeasible_) {
      out.status = SolveStatus::Infeasible;
      return out;
    }
    if (num_artificial_ > 0) {
      std::vector<double> phase_one(total_, 0.0);
      for (int j = first_artificial_; j < total_; ++j) phase_one[j] = 1.0;
      cost_ = std::move(phase_one);
      loop();
      double infeasibility = 0.0;
      for (int j = first_artificial_; j < total_; ++j) infeasibility += std::abs(x_[j]);
      if (infeasibility > kPhaseOneTol) {
        out.status = SolveStatus::Infeasible;
        out.iterations = iterations_;
        return out;
      }
      for (int j = first_artificial_; j < total_; ++j) {
        upper_[j] = 0.0;
        if (state_[j] != ColState::Basic) {
          state_[j] = ColState::AtLower;
          x_[j] = 0.0;
        }
      }
      recompute_basic_values();
    }
    cost_ = phase_two_cost_;
    if (loop() == LoopResult::Unbounded) {
      out.status = SolveStatus::Unbounded;
      out.iterations = iterations_;
      return out;
    }
    out.status = SolveStatus::Optimal;
    out.iterations = iterations_;
    out.values.resize(n_);
    for (int j = 0; j < n_; ++j) out.values[j] = std::clamp(x_[j], lower_[j], upper_[j]);
    out.objective = problem_.objective().evaluate(out.values);
    return out;
  }

 private:
  void build(const std::vector<double>& lower, const std::vector<double>& upper) {
    const auto& rows = problem_.constraints();
    m_ = static_cast<int>(rows.size());
    n_ = static_cast<int>(problem_.num_variables());

    std::vector<std::vector<std::pair<int, double>>> cols(n_);
    rhs_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      rhs_[i] = rows[i].rhs;
      for (const auto& [var, coef] : rows[i].expr.terms())
        cols[var.index].emplace_back(i, coef);
    }

    // Structural columns first, then one logical per row.
    const int base = n_ + m_;
    lower_.assign(base, 0.0);
    upper_.assign(base, 0.0);
    phase_two_cost_.assign(base, 0.0);
    double sign = problem_.sense() == Sense::Maximize ? -1.0 : 1.0;
    for (const auto& [var, coef] : problem_.objective().terms())
      phase_two_cost_[var.index] = sign * coef;
    for (int j = 0; j < n_; ++j) {
      lower_[j] = lower[j];
      upper_[j] = upper[j];
      if (lower_[j] > upper_[j]) trivially_infeasible_ = true;
    }
    for (int i = 0; i < m_; ++i) {
      int j = n_ + i;
      switch (rows[i].relation) {
        case Relation::LessEqual: lower_[j] = 0.0; upper_[j] = kInf; break;
        case Relation::Equal: lower_[j] = 0.0; upper_[j] = 0.0; break;
        case Relation::GreaterEqual: lower_[j] = -kInf; upper_[j] = 0.0; break;
      }
    }

    col_start_.assign(1, 0);
    for (int j = 0; j < n_; ++j) {
      for (const auto& [i, v] : cols[j]) {
        row_index_.push_back(i);
        value_.push_back(v);
      }
      col_start_.push_back(static_cast<int>(row_index_.size()));
    }
    for (int i = 0; i < m_; ++i) {
      row_index_.push_back(i);
      value_.push_back(1.0);
      col_start_.push_back(static_cast<int>(row_index_.size()));
    }

    x_.assign(base, 0.0);
    state_.assign(base, ColState::AtLower);
    for (int j = 0; j < n_; ++j) place_at_bound(j);

    std::vector<double> residual = rhs_;
    for (int j = 0; j < n_; ++j) {
      if (x_[j] == 0.0) continue;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
        residual[row_index_[k]] -= value_[k] * x_[j];
    }

    basis_.assign(m_, -1);
    first_artificial_ = base;
    for (int i = 0; i < m_; ++i) {
      int slack = n_ + i;
      double r = residual[i];
      if (r >= lower_[slack] - kPrimalTol && r <= upper_[slack] + kPrimalTol) {
        basis_[i] = slack;
        state_[slack] = ColState::Basic;
        x_[slack] = r;
        continue;
      }
      double at = r < lower_[slack] ? lower_[slack] : upper_[slack];
      x_[slack] = at;
      state_[slack] = at == lower_[slack] ? ColState::AtLower : ColState::AtUpper;
      double sigma = r - at > 0 ? 1.0 : -1.0;
      int art = static_cast<int>(lower_.size());
      lower_.push_back(0.0);
      upper_.push_back(kInf);
      phase_two_cost_.push_back(0.0);
      x_.push_back(std::abs(r - at));
      state_.push_back(ColState::Basic);
      row_index_.push_back(i);
      value_.push_back(sigma);
      col_start_.push_back(static_cast<int>(row_index_.size()));
      basis_[i] = art;
      ++num_artificial_;
    }
    total_ = static_cast<int>(lower_.size());
    refactor();
  }

  void place_at_bound(int j) {
    if (std::isfinite(lower_[j])) {
      x_[j] = lower_[j];
      state_[j] = ColState::AtLower;
    } else if (std::isfinite(upper_[j])) {
      x_[j] = upper_[j];
      state_[j] = ColState::AtUpper;
    } else {
      x_[j] = 0.0;
      state_[j] = ColState::Free;
    }
  }

  void refactor() {
    etas_.clear();
    if (m_ == 0) return;
    std::vector<Eigen::Triplet<double>> triplets;
    for (int i = 0; i < m_; ++i) {
      int j = basis_[i];
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
        triplets.emplace_back(row_index_[k], i, value_[k]);
    }
    Eigen::SparseMatrix<double> basis_matrix(m_, m_);
    basis_matrix.setFromTriplets(triplets.begin(), triplets.end());
    basis_matrix.makeCompressed();
    lu_.analyzePattern(basis_matrix);
    lu_.factorize(basis_matrix);
    if (lu_.info() != Eigen::Success)
      throw Error(ErrorCode::NumericalBreakdown,
                  "basis matrix became singular during simplex iterations");
  }

  Eigen::VectorXd ftran(Eigen::VectorXd v) const {
    if (m_ == 0) return v;
    v = lu_.solve(v);
    for (const auto& eta : etas_) {
      double pivot_value = v[eta.row];
      if (pivot_value == 0.0) continue;
      v[eta.row] = eta.pivot_inv * pivot_value;
      for (const auto& [i, e] : eta.entries) v[i] += e * pivot_value;
    }
    return v;
  }

  Eigen::VectorXd btran(Eigen::VectorXd v) const {
    if (m_ == 0) return v;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double sum = v[it->row] * it->pivot_inv;
      for (const auto& [i, e] : it->entries) sum += v[i] * e;
      v[it->row] = sum;
    }
    return lu_.transpose().solve(v);
  }

  Eigen::VectorXd column(int j) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) a[row_index_[k]] = value_[k];
    return a;
  }

  void recompute_basic_values() {
    if (m_ == 0) return;
    Eigen::VectorXd r(m_);
    for (int i = 0; i < m_; ++i) r[i] = rhs_[i];
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == ColState::Basic || x_[j] == 0.0) continue;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
        r[row_index_[k]] -= value_[k] * x_[j];
    }
    Eigen::VectorXd xb = ftran(std::move(r));
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb[i];
  }

  bool eligible(int j, double d) const {
    switch (state_[j]) {
      case ColState::Basic: return false;
      case ColState::AtLower: return d < -kDualTol && upper_[j] > lower_[j];
      case ColState::AtUpper: return d > kDualTol && upper_[j] > lower_[j];
      case ColState::Free: return std::abs(d) > kDualTol;
    }
    return false;
  }

  // Returns the entering column or -1 at optimality.
  int price(const Eigen::VectorXd& y, double& reduced_cost) const {
    int best = -1;
    double best_mag = 0.0;
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == ColState::Basic) continue;
      double d = cost_[j];
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) d -= y[row_index_[k]] * value_[k];
      if (!eligible(j, d)) continue;
      if (bland_) {
        reduced_cost = d;
        return j;
      }
      if (std::abs(d) > best_mag) {
        best_mag = std::abs(d);
        best = j;
        reduced_cost = d;
      }
    }
    return best;
  }

  LoopResult loop() {
    const std::size_t limit = 50 * static_cast<std::size_t>(total_ + m_) + 10000;
    int degenerate_run = 0;
    bland_ = false;
    bool verified = false;
    while (true) {
      if (++iterations_ > limit)
        throw Error(ErrorCode::NumericalBreakdown, "simplex iteration limit exceeded");
      if (static_cast<int>(etas_.size()) >= kRefactorInterval) {
        refactor();
        recompute_basic_values();
      }
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
      Eigen::VectorXd y = btran(std::move(cb));

      double d = 0.0;
      int q = price(y, d);
      if (q < 0) {
        // Confirm optimality on a fresh factorization before stopping.
        if (verified || etas_.empty()) return LoopResult::Optimal;
        refactor();
        recompute_basic_values();
        verified = true;
        continue;
      }
      verified = false;
      double dir = d < 0 ? 1.0 : -1.0;

      Eigen::VectorXd alpha = ftran(column(q));

      double flip = upper_[q] - lower_[q];  // inf when either side is open
      int leave = ratio_test(alpha, dir, flip);
      if (leave == -2) {
        // Only near-singular pivots block: retry once on a fresh factor.
        if (!etas_.empty()) {
          refactor();
          recompute_basic_values();
          continue;
        }
        throw Error(ErrorCode::NumericalBreakdown,
                    "no admissible pivot above 1e-11 for column " + std::to_string(q));
      }
      if (leave == -1 && !std::isfinite(flip)) return LoopResult::Unbounded;

      double theta;
      if (leave == -1) {
        theta = flip;
      } else {
        theta = step_length_;
      }
      theta = std::max(theta, 0.0);

      x_[q] += dir * theta;
      if (theta != 0.0) {
        for (int i = 0; i < m_; ++i) {
          if (alpha[i] != 0.0) x_[basis_[i]] -= dir * theta * alpha[i];
        }
      }

      if (theta > 1e-12) {
        degenerate_run = 0;
        bland_ = false;
      } else if (++degenerate_run > kDegenerateSwitch) {
        bland_ = true;
      }

      if (leave == -1) {
        // Bound flip: the entering variable moves to its opposite bound.
        if (dir > 0) {
          x_[q] = upper_[q];
          state_[q] = ColState::AtUpper;
        } else {
          x_[q] = lower_[q];
          state_[q] = ColState::AtLower;
        }
        continue;
      }

      int out = basis_[leave];
      if (leaving_to_upper_) {
        x_[out] = upper_[out];
        state_[out] = ColState::AtUpper;
      } else {
        x_[out] = lower_[out];
        state_[out] = ColState::AtLower;
      }
      if (!std::isfinite(x_[out])) {
        // A free basic variable never blocks, so this cannot happen.
        throw Error(ErrorCode::NumericalBreakdown, "leaving variable has no finite bound");
      }
      state_[q] = ColState::Basic;
      basis_[leave] = q;

      Eta eta;
      eta.row = leave;
      eta.pivot_inv = 1.0 / alpha[leave];
      for (int i = 0; i < m_; ++i) {
        if (i == leave || std::abs(alpha[i]) <= kNoiseTol) continue;
        eta.entries.emplace_back(i, -alpha[i] * eta.pivot_inv);
      }
      etas_.push_back(std::move(eta));
    }
  }

  // Returns the leaving row, -1 when nothing blocks before `flip`, or -2 when
  // the only blocking entries are below the pivot tolerance.
  int ratio_test(const Eigen::VectorXd& alpha, double dir, double flip) {
    auto limit_of = [&](int i, double tol, bool& to_upper) {
      int j = basis_[i];
      double rate = -dir * alpha[i];
      if (rate < 0 && std::isfinite(lower_[j])) {
        to_upper = false;
        return (x_[j] - lower_[j] + tol) / -rate;
      }
      if (rate > 0 && std::isfinite(upper_[j])) {
        to_upper = true;
        return (upper_[j] - x_[j] + tol) / rate;
      }
      return kInf;
    };

    bool to_upper = false;
    int best = -1;
    if (bland_) {
      double min_ratio = kInf;
      for (int i = 0; i < m_; ++i) {
        if (std::abs(alpha[i]) < kPivotTol) continue;
        double r = std::max(limit_of(i, 0.0, to_upper), 0.0);
        if (r < min_ratio - 1e-12 ||
            (r <= min_ratio + 1e-12 && best >= 0 && basis_[i] < basis_[best])) {
          if (r < min_ratio) min_ratio = r;
          best = i;
        }
      }
      if (best >= 0 && flip <= min_ratio) return -1;
      if (best >= 0) {
        step_length_ = min_ratio;
        limit_of(best, 0.0, leaving_to_upper_);
        return best;
      }
    } else {
      // Harris two-pass: bound the step with relaxed limits, then take the
      // largest pivot among rows that block within that bound.
      double relaxed = kInf;
      for (int i = 0; i < m_; ++i) {
        if (std::abs(alpha[i]) < kPivotTol) continue;
        relaxed = std::min(relaxed, limit_of(i, kPrimalTol, to_upper));
      }
      if (std::isfinite(relaxed)) {
        if (flip <= relaxed) return -1;
        double best_mag = 0.0;
        for (int i = 0; i < m_; ++i) {
          double mag = std::abs(alpha[i]);
          if (mag < kPivotTol) continue;
          if (limit_of(i, 0.0, to_upper) <= relaxed && mag > best_mag) {
            best_mag = mag;
            best = i;
          }
        }
        if (best >= 0) {
          step_length_ = std::max(limit_of(best, 0.0, leaving_to_upper_), 0.0);
          return best;
        }
      }
    }

    // Nothing above the pivot tolerance blocks. Accept a weaker pivot down to
    // the breakdown threshold rather than report a false unbounded ray.
    double weak_ratio = kInf;
    int weak = -1;
    bool weak_entries = false;
    for (int i = 0; i < m_; ++i) {
      double mag = std::abs(alpha[i]);
      if (mag >= kPivotTol || mag <= kNoiseTol) continue;
      bool up = false;
      double r = limit_of(i, 0.0, up);
      if (!std::isfinite(r)) continue;
      if (mag < kBreakdownTol) {
        weak_entries = true;
        continue;
      }
      if (r < weak_ratio) {
        weak_ratio = r;
        weak = i;
      }
    }
    if (weak >= 0 && flip > weak_ratio) {
      if (!etas_.empty()) return -2;
      step_length_ = std::max(weak_ratio, 0.0);
      limit_of(weak, 0.0, leaving_to_upper_);
      return weak;
    }
    (void)weak_entries;
    return -1;
  }

  const MilpProblem& problem_;
  int m_ = 0;
  int n_ = 0;
  int total_ = 0;
  int first_artificial_ = 0;
  int num_artificial_ = 0;
  bool trivially_infeasible_ = false;

  std::vector<int> col_start_;
  std::vector<int> row_index_;
  std::vector<double> value_;
  std::vector<double> rhs_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> cost_;
  std::vector<double> phase_two_cost_;
  std::vector<double> x_;
  std::vector<ColState> state_;
  std::vector<int> basis_;

  // Eigen's transpose view requires a non-const factor.
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;

  bool bland_ = false;
  double step_length_ = 0.0;
  bool leaving_to_upper_ = false;
  std::size_t iterations_ = 0;
};

}  // namespace

LpSolution solve_lp(const MilpProblem& problem, const std::vector<double>& lower,
                    const std::vector<double>& upper) {
  problem.validate();
  if (lower.size() != problem.num_variables() || upper.size() != problem.num_variables())
    throw Error(ErrorCode::InvalidArgument, "bound vectors do not match variable count");
  RevisedSimplex engine(problem, lower, upper);
  return engine.run();
}

LpSolution solve_lp(const MilpProblem& problem) {
  std::vector<double> lower;
  std::vector<double> upper;
  lower.reserve(problem.num_variables());
  upper.reserve(problem.num_variables());
  for (const auto& v : problem.variables()) {
    lower.push_back(v.lower);
    upper.push_back(v.upper);
  }
  return solve_lp(problem, lower, upper);
}

namespace {

struct Node {
  double bound = 0.0;  // minimization-sense LP bound
  std::size_t seq = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> values;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

// Most fractional integral variable, lowest id on ties; -1 if integral.
int pick_branch(const MilpProblem& problem, const std::vector<double>& x, double tol) {
  int best = -1;
  double best_frac = 0.0;
  for (const auto& v : problem.variables()) {
    if (!v.integral) continue;
    double value = x[v.id.index];
    double frac = value - std::floor(value);
    double dist = std::min(frac, 1.0 - frac);
    if (dist <= tol) continue;
    if (dist > best_frac + 1e-12) {
      best_frac = dist;
      best = static_cast<int>(v.id.index);
    }
  }
  return best;
}

}  // namespace

MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options) {
  if (!(options.rel_gap >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "rel_gap must be non-negative");
  if (options.node_limit < 1)
    throw Error(ErrorCode::InvalidArgument, "node_limit must be at least 1");

  const double sign = problem.sense() == Sense::Maximize ? -1.0 : 1.0;
  MilpSolution result;

  Node root;
  for (const auto& v : problem.variables()) {
    double lo = v.lower;
    double hi = v.upper;
    if (v.integral) {
      lo = std::ceil(lo - options.integrality_tol);
      hi = std::floor(hi + options.integrality_tol);
    }
    root.lower.push_back(lo);
    root.upper.push_back(hi);
  }

  auto solve_node = [&](Node& node) -> SolveStatus {
    ++result.nodes_explored;
    LpSolution lp = solve_lp(problem, node.lower, node.upper);
    result.lp_iterations += lp.iterations;
    if (lp.status == SolveStatus::Optimal) {
      node.bound = sign * lp.objective;
      node.values = std::move(lp.values);
    }
    return lp.status;
  };

  SolveStatus root_status = solve_node(root);
  if (root_status == SolveStatus::Infeasible) {
    result.status = SolveStatus::Infeasible;
    return result;
  }
  if (root_status == SolveStatus::Unbounded) {
    result.status = SolveStatus::Unbounded;
    return result;
  }

  bool have_incumbent = false;
  double incumbent = kInf;
  std::vector<double> incumbent_values;

  auto consider = [&](Node& node) -> bool {
    if (pick_branch(problem, node.values, options.integrality_tol) >= 0) return false;
    if (node.bound < incumbent - 1e-9 || !have_incumbent) {
      incumbent = node.bound;
      incumbent_values = node.values;
      have_incumbent = true;
    }
    return true;
  };

  auto gap_of = [&](double lower_bound) {
    double diff = std::max(incumbent - lower_bound, 0.0);
    if (diff <= 1e-9) return 0.0;
    return diff / std::max(std::abs(incumbent), 1e-10);
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::size_t seq = 0;
  if (!consider(root)) {
    root.seq = seq++;
    open.push(std::move(root));
  }

  bool hit_limit = false;
  double final_bound = incumbent;
  while (!open.empty()) {
    if (have_incumbent && gap_of(open.top().bound) <= options.rel_gap) {
      final_bound = open.top().bound;
      break;
    }
    if (result.nodes_explored >= options.node_limit) {
      hit_limit = true;
      final_bound = open.top().bound;
      break;
    }
    Node node = open.top();
    open.pop();
    result.explored_bounds.push_back(sign * node.bound);

    int var = pick_branch(problem, node.values, options.integrality_tol);
    double value = node.values[var];
    for (int side = 0; side < 2; ++side) {
      Node child;
      child.lower = node.lower;
      child.upper = node.upper;
      if (side == 0)
        child.upper[var] = std::floor(value);
      else
        child.lower[var] = std::ceil(value);
      if (child.lower[var] > child.upper[var]) continue;
      SolveStatus status = solve_node(child);
      if (status != SolveStatus::Optimal) continue;  // unbounded children are dropped with the root bound
      if (have_incumbent && child.bound >= incumbent - 1e-9) continue;
      if (consider(child)) continue;
      child.seq = seq++;
      open.push(std::move(child));
      if (result.nodes_explored >= options.node_limit) break;
    }
  }
  if (open.empty()) final_bound = incumbent;

  if (!have_incumbent) {
    if (hit_limit)
      throw Error(ErrorCode::NodeLimitExceeded,
                  "node limit " + std::to_string(options.node_limit) +
                      " reached before any integer-feasible point was found");
    result.status = SolveStatus::Infeasible;
    return result;
  }

  result.gap = gap_of(final_bound);
  result.status = result.gap <= options.rel_gap ? SolveStatus::Optimal : SolveStatus::Feasible;
  for (const auto& v : problem.variables()) {
    if (v.integral) incumbent_values[v.id.index] = std::round(incumbent_values[v.id.index]);
  }
  result.values = std::move(incumbent_values);
  result.objective = problem.objective().evaluate(result.values);
  return result;
}

}  // namespace mesopt
