#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfmdp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// minimize cost·x  s.t.  A_ge x ≥ b_ge,  A_eq x = b_eq,  lower ≤ x ≤ upper.
struct LinearProgram {
  Eigen::VectorXd cost;
  Eigen::MatrixXd a_ge;
  Eigen::VectorXd b_ge;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  /// Optional column names, used only by write_lp_format.
  std::vector<std::string> names;

  /// n variables with bounds [0, +inf) and no rows.
  static LinearProgram with_variables(Eigen::Index n);

  Eigen::Index variable_count() const noexcept { return cost.size(); }
  Eigen::Index ge_rows() const noexcept { return a_ge.rows(); }
  Eigen::Index eq_rows() const noexcept { return a_eq.rows(); }

  /// Appends a ≥ row; `row` must have variable_count() entries.
  void add_ge(const Eigen::Ref<const Eigen::VectorXd>& row, double rhs);
  void add_eq(const Eigen::Ref<const Eigen::VectorXd>& row, double rhs);
  void set_free(Eigen::Index j);
  void set_bounds(Eigen::Index j, double lo, double hi);

  /// Throws InputError on inconsistent dimensions or non-finite data.
  void check() const;
};

enum class LpStatus { Optimal, Unbounded, Infeasible };

const char* to_string(LpStatus s) noexcept;

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd primal;
  /// One multiplier per row: ≥ rows first, then = rows. Nonnegative on ≥ rows.
  Eigen::VectorXd dual;
  /// cost − Aᵀ dual; the multipliers of the variable bounds.
  Eigen::VectorXd reduced_cost;
  double objective = 0.0;
  /// bᵀ dual plus the bound terms; equals objective at optimality.
  double dual_objective = 0.0;
  /// When Unbounded: a feasible direction d with cost·d < 0.
  Eigen::VectorXd ray;
  std::size_t iterations = 0;

  Eigen::VectorXd dual_ge(Eigen::Index ge_rows) const { return dual.head(ge_rows); }
  Eigen::VectorXd dual_eq(Eigen::Index ge_rows) const { return dual.tail(dual.size() - ge_rows); }
};

struct SimplexOptions {
  double pivot_tolerance = 1e-9;
  double optimality_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  /// 0 selects the default cap of 50·(rows + columns) of the standard form.
  std::size_t max_iterations = 0;
};

/// Dense two-phase tableau simplex with Bland's rule. Deterministic: ties are
/// broken by lowest column index (entering) and lowest basic index (leaving).
/// Throws InputError on malformed LPs and SolverError when the iteration cap
/// is exceeded.
LpSolution solve(const LinearProgram& lp, const SimplexOptions& options = {});

/// Writes `lp` in CPLEX LP text format (for debugging dumps).
void write_lp_format(std::ostream& os, const LinearProgram& lp);

}  // namespace hfmdp
