#include "mesopt/milp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace mesopt {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::NodeLimitExceeded: return "NodeLimitExceeded";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingCapacity: return "MissingCapacity";
    case ErrorCode::MissingProfile: return "MissingProfile";
    case ErrorCode::HorizonMismatch: return "HorizonMismatch";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::MissingCostParameter: return "MissingCostParameter";
    case ErrorCode::UnknownQuantity: return "UnknownQuantity";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::FrozenCapacityMissing: return "FrozenCapacityMissing";
    case ErrorCode::IndivisibleLength: return "IndivisibleLength";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

LinearExpression& LinearExpression::add(VariableId var, double coef) {
  if (coef == 0.0) return *this;
  auto [it, inserted] = terms_.try_emplace(var, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

LinearExpression& LinearExpression::operator+=(const LinearExpression& other) {
  for (const auto& [var, coef] : other.terms_) add(var, coef);
  constant_ += other.constant_;
  return *this;
}

LinearExpression& LinearExpression::operator-=(const LinearExpression& other) {
  for (const auto& [var, coef] : other.terms_) add(var, -coef);
  constant_ -= other.constant_;
  return *this;
}

LinearExpression& LinearExpression::operator*=(double factor) {
  if (factor == 0.0) {
    terms_.clear();
    constant_ = 0.0;
    return *this;
  }
  for (auto& [var, coef] : terms_) coef *= factor;
  constant_ *= factor;
  return *this;
}

double LinearExpression::coefficient(VariableId var) const {
  auto it = terms_.find(var);
  return it == terms_.end() ? 0.0 : it->second;
}

double LinearExpression::evaluate(const std::vector<double>& values) const {
  double sum = constant_;
  for (const auto& [var, coef] : terms_) sum += coef * values.at(var.index);
  return sum;
}

LinearExpression operator+(LinearExpression lhs, const LinearExpression& rhs) {
  lhs += rhs;
  return lhs;
}

LinearExpression operator-(LinearExpression lhs, const LinearExpression& rhs) {
  lhs -= rhs;
  return lhs;
}

LinearExpression operator*(double factor, LinearExpression expr) {
  expr *= factor;
  return expr;
}

namespace {

// CPLEX-LP identifiers: no whitespace, not starting with a digit or '.',
// and none of the characters the format reserves for operators.
bool is_lp_safe_name(std::string_view name) {
  if (name.empty() || name.size() > 255) return false;
  if (std::isdigit(static_cast<unsigned char>(name.front())) ||
      name.front() == '.')
    return false;
  for (char c : name) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc) || !std::isprint(uc)) return false;
    if (c == '+' || c == '-' || c == '*' || c == '^' || c == ':' ||
        c == '<' || c == '>' || c == '=' || c == '[' || c == ']' || c == '\\')
      return false;
  }
  return true;
}

}  // namespace

VariableId MilpProblem::add_variable(std::string_view name, double lower,
                                     double upper, bool integral) {
  std::string key(name);
  if (!is_lp_safe_name(key))
    throw Error(ErrorCode::InvalidArgument,
                "variable name '" + key + "' is not a valid LP identifier");
  if (by_name_.contains(key))
    throw Error(ErrorCode::DuplicateName, "variable '" + key + "' already exists");
  if (std::isnan(lower) || std::isnan(upper) || lower > upper ||
      lower == kInf || upper == -kInf)
    throw Error(ErrorCode::InvalidBounds,
                "variable '" + key + "' has lower bound " + format_real(lower) +
                    " above upper bound " + format_real(upper));
  VariableId id{static_cast<std::uint32_t>(variables_.size())};
  variables_.push_back(Variable{id, key, lower, upper, integral});
  by_name_.emplace(std::move(key), id);
  return id;
}

void MilpProblem::check_expr(const LinearExpression& expr,
                             std::string_view where) const {
  for (const auto& [var, coef] : expr.terms()) {
    if (var.index >= variables_.size())
      throw Error(ErrorCode::UnknownVariable,
                  std::string(where) + " references undeclared variable id " +
                      std::to_string(var.index));
    if (!std::isfinite(coef))
      throw Error(ErrorCode::InvalidArgument,
                  std::string(where) + " has a non-finite coefficient");
  }
}

std::size_t MilpProblem::add_constraint(std::string_view name,
                                        const LinearExpression& expr,
                                        Relation relation, double rhs) {
  std::string key(name);
  check_expr(expr, "constraint '" + key + "'");
  if (!is_lp_safe_name(key))
    throw Error(ErrorCode::InvalidArgument,
                "constraint name '" + key + "' is not a valid LP identifier");
  if (!std::isfinite(rhs))
    throw Error(ErrorCode::InvalidArgument,
                "constraint '" + key + "' has a non-finite right-hand side");
  Constraint row;
  row.name = std::move(key);
  row.relation = relation;
  row.rhs = rhs - expr.constant();
  for (const auto& [var, coef] : expr.terms()) row.expr.add(var, coef);
  constraints_.push_back(std::move(row));
  return constraints_.size() - 1;
}

void MilpProblem::set_objective(const LinearExpression& expr, Sense sense) {
  check_expr(expr, "objective");
  objective_ = expr;
  sense_ = sense;
}

void MilpProblem::set_bounds(VariableId var, double lower, double upper) {
  if (var.index >= variables_.size())
    throw Error(ErrorCode::UnknownVariable,
                "set_bounds on undeclared variable id " + std::to_string(var.index));
  auto& v = variables_[var.index];
  if (std::isnan(lower) || std::isnan(upper) || lower > upper)
    throw Error(ErrorCode::InvalidBounds,
                "variable '" + v.name + "' has lower bound " + format_real(lower) +
                    " above upper bound " + format_real(upper));
  v.lower = lower;
  v.upper = upper;
}

const Variable& MilpProblem::variable(VariableId id) const {
  if (id.index >= variables_.size())
    throw Error(ErrorCode::UnknownVariable,
                "unknown variable id " + std::to_string(id.index));
  return variables_[id.index];
}

std::optional<VariableId> MilpProblem::find_variable(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool MilpProblem::has_integers() const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [](const Variable& v) { return v.integral; });
}

void MilpProblem::validate() const {
  for (const auto& row : constraints_) check_expr(row.expr, "constraint '" + row.name + "'");
  check_expr(objective_, "objective");
}

double MilpProblem::max_violation(const std::vector<double>& values,
                                  bool check_integrality) const {
  double worst = 0.0;
  for (const auto& v : variables_) {
    double x = values.at(v.id.index);
    worst = std::max({worst, v.lower - x, x - v.upper});
    if (check_integrality && v.integral)
      worst = std::max(worst, std::abs(x - std::round(x)));
  }
  for (const auto& row : constraints_) {
    double lhs = row.expr.evaluate(values);
    switch (row.relation) {
      case Relation::LessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case Relation::GreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case Relation::Equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  return worst;
}

std::string format_real(double value) {
  if (value == kInf) return "inf";
  if (value == -kInf) return "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", value);
  return buf;
}

namespace {

void append_terms(std::string& out, const LinearExpression& expr,
                  const std::vector<Variable>& vars) {
  bool first = true;
  std::size_t line_len = 0;
  for (const auto& [var, coef] : expr.terms()) {
    std::string term;
    if (first) {
      if (coef < 0) term += "- ";
    } else {
      term += coef < 0 ? " - " : " + ";
    }
    double mag = std::abs(coef);
    if (mag != 1.0) term += format_real(mag) + " ";
    term += vars[var.index].name;
    // LP readers cap line length; wrap long rows.
    if (line_len + term.size() > 200) {
      out += "\n   ";
      line_len = 3;
    }
    out += term;
    line_len += term.size();
    first = false;
  }
}

}  // namespace

std::string export_lp_text(const MilpProblem& problem) {
  problem.validate();
  const auto& vars = problem.variables();
  std::string out;
  out += problem.sense() == Sense::Minimize ? "Minimize\n" : "Maximize\n";
  out += " obj: ";
  const auto& obj = problem.objective();
  if (obj.empty()) {
    out += "0";
  } else {
    append_terms(out, obj, vars);
  }
  // The LP format has no objective constant; keep it visible as a comment.
  out += "\n";
  if (obj.constant() != 0.0)
    out += "\\ objective constant: " + format_real(obj.constant()) + "\n";

  out += "Subject To\n";
  for (const auto& row : problem.constraints()) {
    out += " " + row.name + ": ";
    if (row.expr.empty())
      out += vars.empty() ? std::string("0") : "0 " + vars.front().name;
    else
      append_terms(out, row.expr, vars);
    switch (row.relation) {
      case Relation::LessEqual: out += " <= "; break;
      case Relation::Equal: out += " = "; break;
      case Relation::GreaterEqual: out += " >= "; break;
    }
    out += format_real(row.rhs) + "\n";
  }

  out += "Bounds\n";
  for (const auto& v : vars) {
    if (v.is_binary()) continue;
    bool lo_inf = v.lower == -kInf;
    bool up_inf = v.upper == kInf;
    if (lo_inf && up_inf) {
      out += " " + v.name + " free\n";
    } else if (v.lower == v.upper) {
      out += " " + v.name + " = " + format_real(v.lower) + "\n";
    } else if (lo_inf) {
      out += " -inf <= " + v.name + " <= " + format_real(v.upper) + "\n";
    } else if (up_inf) {
      // LP default is [0, inf); only non-default lower bounds are written.
      if (v.lower != 0.0) out += " " + v.name + " >= " + format_real(v.lower) + "\n";
    } else {
      out += " " + format_real(v.lower) + " <= " + v.name + " <= " +
             format_real(v.upper) + "\n";
    }
  }

  std::vector<const Variable*> generals;
  std::vector<const Variable*> binaries;
  for (const auto& v : vars) {
    if (!v.integral) continue;
    (v.is_binary() ? binaries : generals).push_back(&v);
  }
  if (!generals.empty()) {
    out += "Generals\n";
    for (const auto* v : generals) out += " " + v->name + "\n";
  }
  if (!binaries.empty()) {
    out += "Binaries\n";
    for (const auto* v : binaries) out += " " + v->name + "\n";
  }
  out += "End\n";
  return out;
}

}  // namespace mesopt
