#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mesopt/error.hpp"

namespace mesopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dense index of a variable inside one MilpProblem.
struct VariableId {
  std::uint32_t index = 0;

  friend bool operator==(VariableId, VariableId) = default;
  friend auto operator<=>(VariableId, VariableId) = default;
};

struct Variable {
  VariableId id;
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  bool integral = false;

  bool is_binary() const { return integral && lower == 0.0 && upper == 1.0; }
};

/// Sparse affine expression. Zero coefficients are never stored.
class LinearExpression {
 public:
  LinearExpression() = default;
  explicit LinearExpression(double constant) : constant_(constant) {}
  LinearExpression(VariableId var, double coef = 1.0) { add(var, coef); }

  LinearExpression& add(VariableId var, double coef);
  LinearExpression& add_constant(double value) {
    constant_ += value;
    return *this;
  }
  LinearExpression& operator+=(const LinearExpression& other);
  LinearExpression& operator-=(const LinearExpression& other);
  LinearExpression& operator*=(double factor);

  double coefficient(VariableId var) const;
  double constant() const { return constant_; }
  const std::map<VariableId, double>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Evaluates the expression at a full assignment indexed by VariableId.
  double evaluate(const std::vector<double>& values) const;

 private:
  std::map<VariableId, double> terms_;
  double constant_ = 0.0;
};

LinearExpression operator+(LinearExpression lhs, const LinearExpression& rhs);
LinearExpression operator-(LinearExpression lhs, const LinearExpression& rhs);
LinearExpression operator*(double factor, LinearExpression expr);

enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Sense { Minimize, Maximize };

/// Stored in canonical form: expr has no constant and no zero terms.
struct Constraint {
  std::string name;
  LinearExpression expr;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

class MilpProblem {
 public:
  VariableId add_variable(std::string_view name, double lower, double upper,
                          bool integral = false);
  std::size_t add_constraint(std::string_view name,
                             const LinearExpression& expr, Relation relation,
                             double rhs);
  void set_objective(const LinearExpression& expr, Sense sense);

  /// Tightens or replaces the bounds of an existing variable.
  void set_bounds(VariableId var, double lower, double upper);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const LinearExpression& objective() const { return objective_; }
  Sense sense() const { return sense_; }

  const Variable& variable(VariableId id) const;
  std::optional<VariableId> find_variable(std::string_view name) const;
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  bool has_integers() const;

  /// Throws UnknownVariable if any expression references a missing id.
  void validate() const;

  /// Largest violation of bounds, constraints and integrality at `values`.
  double max_violation(const std::vector<double>& values,
                       bool check_integrality = true) const;

 private:
  void check_expr(const LinearExpression& expr, std::string_view where) const;

  std::vector<Variable> variables_;
  std::unordered_map<std::string, VariableId> by_name_;
  std::vector<Constraint> constraints_;
  LinearExpression objective_;
  Sense sense_ = Sense::Minimize;
};

/// CPLEX-LP text. Deterministic: variables and rows appear in insertion order.
std::string export_lp_text(const MilpProblem& problem);

/// Formats a real with 15 significant digits, trimming "-0" to "0".
std::string format_real(double value);

}  // namespace mesopt
