#include "hfmdp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "hfmdp/errors.hpp"

namespace hfmdp {

LinearProgram LinearProgram::with_variables(Eigen::Index n) {
  LinearProgram lp;
  lp.cost = Eigen::VectorXd::Zero(n);
  lp.a_ge.resize(0, n);
  lp.b_ge.resize(0);
  lp.a_eq.resize(0, n);
  lp.b_eq.resize(0);
  lp.lower = Eigen::VectorXd::Zero(n);
  lp.upper = Eigen::VectorXd::Constant(n, kInf);
  return lp;
}

namespace {

void append_row(Eigen::MatrixXd& a, Eigen::VectorXd& b, const Eigen::Ref<const Eigen::VectorXd>& row,
                double rhs) {
  if (row.size() != a.cols()) throw InputError("LP row length does not match variable count");
  const auto r = a.rows();
  a.conservativeResize(r + 1, Eigen::NoChange);
  a.row(r) = row.transpose();
  b.conservativeResize(r + 1);
  b(r) = rhs;
}

}  // namespace

void LinearProgram::add_ge(const Eigen::Ref<const Eigen::VectorXd>& row, double rhs) {
  append_row(a_ge, b_ge, row, rhs);
}

void LinearProgram::add_eq(const Eigen::Ref<const Eigen::VectorXd>& row, double rhs) {
  append_row(a_eq, b_eq, row, rhs);
}

void LinearProgram::set_free(Eigen::Index j) { set_bounds(j, -kInf, kInf); }

void LinearProgram::set_bounds(Eigen::Index j, double lo, double hi) {
  lower(j) = lo;
  upper(j) = hi;
}

void LinearProgram::check() const {
  const auto n = cost.size();
  if (a_ge.cols() != n || a_eq.cols() != n || lower.size() != n || upper.size() != n)
    throw InputError("LP dimension mismatch between cost, constraint blocks and bounds");
  if (a_ge.rows() != b_ge.size() || a_eq.rows() != b_eq.size())
    throw InputError("LP dimension mismatch between constraint matrices and right-hand sides");
  if (!cost.allFinite() || !a_ge.allFinite() || !b_ge.allFinite() || !a_eq.allFinite() ||
      !b_eq.allFinite())
    throw InputError("LP data must be finite");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) == kInf || upper(j) == -kInf)
      throw InputError("LP variable " + std::to_string(j) + " has an invalid bound");
  }
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n)
    throw InputError("LP name list does not match variable count");
}

const char* to_string(LpStatus s) noexcept {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

enum class VarKind { Shift, Flip, Split };

struct VarMap {
  VarKind kind;
  Eigen::Index column;
  double offset;  // l for Shift, u for Flip
};

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Standard form: As x = rhs, x ≥ 0, rhs ≥ 0, plus the bookkeeping to map
/// the solution back to the caller's variables and rows.
struct StandardForm {
  Eigen::MatrixXd a;
  Eigen::VectorXd rhs;
  Eigen::VectorXd cost;
  std::vector<VarMap> vars;
  std::vector<double> row_sign;  // -1 when the row was negated
  std::vector<Eigen::Index> basis;
  Eigen::Index structural = 0;
  Eigen::Index first_artificial = 0;
};

StandardForm to_standard(const LinearProgram& lp) {
  StandardForm sf;
  const Eigen::Index n = lp.variable_count();
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> bound_rows;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lo = lp.lower(j), hi = lp.upper(j);
    if (std::isfinite(lo)) {
      sf.vars.push_back({VarKind::Shift, cols++, lo});
      if (std::isfinite(hi)) bound_rows.push_back(j);
    } else if (std::isfinite(hi)) {
      sf.vars.push_back({VarKind::Flip, cols++, hi});
    } else {
      sf.vars.push_back({VarKind::Split, cols, 0.0});
      cols += 2;
    }
  }
  sf.structural = cols;

  const Eigen::Index n_ge = lp.ge_rows(), n_eq = lp.eq_rows();
  const Eigen::Index n_bound = static_cast<Eigen::Index>(bound_rows.size());
  const Eigen::Index m = n_ge + n_eq + n_bound;
  const Eigen::Index n_slack = n_ge + n_bound;

  // Structural block and shifted right-hand sides.
  Eigen::MatrixXd s(m, cols);
  s.setZero();
  Eigen::VectorXd rhs(m);
  auto fill = [&](Eigen::Index row, const Eigen::Ref<const Eigen::RowVectorXd>& coef, double b) {
    double shift = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = coef(j);
      if (c == 0.0) continue;
      const auto& vm = sf.vars[j];
      switch (vm.kind) {
        case VarKind::Shift: s(row, vm.column) = c; shift += c * vm.offset; break;
        case VarKind::Flip: s(row, vm.column) = -c; shift += c * vm.offset; break;
        case VarKind::Split: s(row, vm.column) = c; s(row, vm.column + 1) = -c; break;
      }
    }
    rhs(row) = b - shift;
  };
  for (Eigen::Index i = 0; i < n_ge; ++i) fill(i, lp.a_ge.row(i), lp.b_ge(i));
  for (Eigen::Index i = 0; i < n_eq; ++i) fill(n_ge + i, lp.a_eq.row(i), lp.b_eq(i));
  for (Eigen::Index k = 0; k < n_bound; ++k) {
    const auto j = bound_rows[k];
    s(n_ge + n_eq + k, sf.vars[j].column) = 1.0;
    rhs(n_ge + n_eq + k) = lp.upper(j) - lp.lower(j);
  }

  // Slack coefficients: -1 (surplus) on ≥ rows, +1 on bound rows (≤).
  Eigen::VectorXd slack_coef(m);
  slack_coef.setZero();
  std::vector<Eigen::Index> slack_col(m, -1);
  for (Eigen::Index i = 0; i < n_ge; ++i) {
    slack_coef(i) = -1.0;
    slack_col[i] = cols + i;
  }
  for (Eigen::Index k = 0; k < n_bound; ++k) {
    slack_coef(n_ge + n_eq + k) = 1.0;
    slack_col[n_ge + n_eq + k] = cols + n_ge + k;
  }

  sf.row_sign.assign(m, 1.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (rhs(i) < 0.0) {
      sf.row_sign[i] = -1.0;
      s.row(i) *= -1.0;
      rhs(i) = -rhs(i);
      slack_coef(i) = -slack_coef(i);
    }
  }

  // Rows whose slack enters with +1 start with the slack basic; the rest
  // need an artificial.
  std::vector<Eigen::Index> needs_art;
  sf.basis.assign(m, -1);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (slack_col[i] >= 0 && slack_coef(i) > 0.0) sf.basis[i] = slack_col[i];
    else needs_art.push_back(i);
  }
  sf.first_artificial = cols + n_slack;
  const Eigen::Index total = sf.first_artificial + static_cast<Eigen::Index>(needs_art.size());

  sf.a.resize(m, total);
  sf.a.setZero();
  sf.a.leftCols(cols) = s;
  for (Eigen::Index i = 0; i < m; ++i)
    if (slack_col[i] >= 0) sf.a(i, slack_col[i]) = slack_coef(i);
  for (std::size_t k = 0; k < needs_art.size(); ++k) {
    const auto col = sf.first_artificial + static_cast<Eigen::Index>(k);
    sf.a(needs_art[k], col) = 1.0;
    sf.basis[needs_art[k]] = col;
  }
  sf.rhs = rhs;

  sf.cost = Eigen::VectorXd::Zero(total);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& vm = sf.vars[j];
    const double c = lp.cost(j);
    switch (vm.kind) {
      case VarKind::Shift: sf.cost(vm.column) = c; break;
      case VarKind::Flip: sf.cost(vm.column) = -c; break;
      case VarKind::Split: sf.cost(vm.column) = c; sf.cost(vm.column + 1) = -c; break;
    }
  }
  return sf;
}

class TableauSimplex {
 public:
  TableauSimplex(const StandardForm& sf, const SimplexOptions& opt)
      : sf_(sf), opt_(opt), m_(sf.a.rows()), n_(sf.a.cols()), basis_(sf.basis) {
    t_.resize(m_ + 1, n_ + 1);
    t_.topLeftCorner(m_, n_) = sf.a;
    t_.topRightCorner(m_, 1) = sf.rhs;
    t_.row(m_).setZero();
    cap_ = opt.max_iterations ? opt.max_iterations : 50 * static_cast<std::size_t>(m_ + n_);
    if (cap_ == 0) cap_ = 1;
  }

  /// Returns false when phase 1 proves infeasibility.
  bool phase_one() {
    if (sf_.first_artificial == n_) return true;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_);
    c.tail(n_ - sf_.first_artificial).setOnes();
    price(c);
    const auto result = iterate(/*allow_artificial=*/true);
    if (result != Step::Optimal) throw SolverError("phase 1 of the simplex did not terminate optimally");
    const double infeas = -t_(m_, n_);
    const double scale = std::max(1.0, sf_.rhs.cwiseAbs().maxCoeff());
    if (infeas > opt_.feasibility_tolerance * scale) return false;
    // Drive zero-level artificials out of the basis where possible.
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[i] < sf_.first_artificial) continue;
      for (Eigen::Index j = 0; j < sf_.first_artificial; ++j) {
        if (std::abs(t_(i, j)) > opt_.pivot_tolerance) {
          pivot(i, j);
          break;
        }
      }
    }
    return true;
  }

  enum class Step { Optimal, Unbounded };

  Step phase_two(Eigen::Index& unbounded_column) {
    price(sf_.cost);
    const auto r = iterate(/*allow_artificial=*/false);
    unbounded_column = unbounded_column_;
    return r;
  }

  const std::vector<Eigen::Index>& basis() const noexcept { return basis_; }
  const Tableau& tableau() const noexcept { return t_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  void price(const Eigen::VectorXd& c) {
    t_.row(m_).setZero();
    t_.row(m_).head(n_) = c.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = c(basis_[i]);
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index q) {
    t_.row(r) /= t_(r, q);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, q);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    t_(r, q) = 1.0;
    basis_[r] = q;
  }

  Step iterate(bool allow_artificial) {
    const Eigen::Index limit = allow_artificial ? n_ : sf_.first_artificial;
    while (true) {
      Eigen::Index q = -1;
      for (Eigen::Index j = 0; j < limit; ++j) {
        if (t_(m_, j) < -opt_.optimality_tolerance) {
          q = j;
          break;
        }
      }
      if (q < 0) return Step::Optimal;

      Eigen::Index r = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = t_(i, q);
        if (a <= opt_.pivot_tolerance) continue;
        const double ratio = t_(i, n_) / a;
        if (r < 0) {
          r = i;
          best = ratio;
          continue;
        }
        const double tie = 1e-12 * std::max(1.0, std::abs(best));
        if (ratio < best - tie) {
          r = i;
          best = ratio;
        } else if (ratio <= best + tie && basis_[i] < basis_[r]) {
          r = i;
          best = std::min(best, ratio);
        }
      }
      if (r < 0) {
        unbounded_column_ = q;
        return Step::Unbounded;
      }
      if (++iterations_ > cap_)
        throw SolverError("simplex iteration cap (" + std::to_string(cap_) + ") exceeded");
      pivot(r, q);
    }
  }

  const StandardForm& sf_;
  const SimplexOptions& opt_;
  Eigen::Index m_;
  Eigen::Index n_;
  Tableau t_;
  std::vector<Eigen::Index> basis_;
  std::size_t cap_ = 0;
  std::size_t iterations_ = 0;
  Eigen::Index unbounded_column_ = -1;
};

Eigen::VectorXd to_original(const StandardForm& sf, const Eigen::VectorXd& x, bool direction) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(sf.vars.size()));
  for (std::size_t j = 0; j < sf.vars.size(); ++j) {
    const auto& vm = sf.vars[j];
    const auto idx = static_cast<Eigen::Index>(j);
    switch (vm.kind) {
      case VarKind::Shift: out(idx) = (direction ? 0.0 : vm.offset) + x(vm.column); break;
      case VarKind::Flip: out(idx) = (direction ? 0.0 : vm.offset) - x(vm.column); break;
      case VarKind::Split: out(idx) = x(vm.column) - x(vm.column + 1); break;
    }
  }
  return out;
}

}  // namespace

LpSolution solve(const LinearProgram& lp, const SimplexOptions& options) {
  lp.check();
  LpSolution sol;
  const Eigen::Index n = lp.variable_count();
  const Eigen::Index n_rows = lp.ge_rows() + lp.eq_rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lp.lower(j) > lp.upper(j)) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
  }

  const StandardForm sf = to_standard(lp);
  TableauSimplex simplex(sf, options);
  if (!simplex.phase_one()) {
    sol.status = LpStatus::Infeasible;
    sol.iterations = simplex.iterations();
    return sol;
  }
  Eigen::Index unbounded_col = -1;
  const auto step = simplex.phase_two(unbounded_col);
  sol.iterations = simplex.iterations();
  const auto& basis = simplex.basis();
  const Eigen::Index m = sf.a.rows();
  const Eigen::Index total = sf.a.cols();

  if (step == TableauSimplex::Step::Unbounded) {
    sol.status = LpStatus::Unbounded;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(total);
    dir(unbounded_col) = 1.0;
    const auto& t = simplex.tableau();
    for (Eigen::Index i = 0; i < m; ++i) dir(basis[i]) = -t(i, unbounded_col);
    sol.ray = to_original(sf, dir, /*direction=*/true);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(total);
    for (Eigen::Index i = 0; i < m; ++i) x(basis[i]) = t(i, t.cols() - 1);
    sol.primal = to_original(sf, x, false);
    sol.objective = -kInf;
    return sol;
  }

  // Recover primal and duals from the final basis with a fresh factorisation;
  // this removes the round-off accumulated by tableau updates.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd y_std = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    Eigen::MatrixXd b(m, m);
    Eigen::VectorXd cb(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      b.col(i) = sf.a.col(basis[i]);
      cb(i) = basis[i] < sf.first_artificial ? sf.cost(basis[i]) : 0.0;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    const Eigen::VectorXd xb = lu.solve(sf.rhs);
    y_std = lu.transpose().solve(cb);
    for (Eigen::Index i = 0; i < m; ++i) x(basis[i]) = xb(i);
  }

  sol.status = LpStatus::Optimal;
  sol.primal = to_original(sf, x, false);
  sol.dual.resize(n_rows);
  for (Eigen::Index i = 0; i < n_rows; ++i) sol.dual(i) = sf.row_sign[i] * y_std(i);
  sol.reduced_cost = lp.cost;
  if (lp.ge_rows() > 0) sol.reduced_cost -= lp.a_ge.transpose() * sol.dual.head(lp.ge_rows());
  if (lp.eq_rows() > 0) sol.reduced_cost -= lp.a_eq.transpose() * sol.dual.tail(lp.eq_rows());
  sol.objective = lp.cost.dot(sol.primal);
  double dual_obj = 0.0;
  if (lp.ge_rows() > 0) dual_obj += lp.b_ge.dot(sol.dual.head(lp.ge_rows()));
  if (lp.eq_rows() > 0) dual_obj += lp.b_eq.dot(sol.dual.tail(lp.eq_rows()));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = sol.reduced_cost(j);
    if (d > 0.0 && std::isfinite(lp.lower(j))) dual_obj += d * lp.lower(j);
    else if (d < 0.0 && std::isfinite(lp.upper(j))) dual_obj += d * lp.upper(j);
    else dual_obj += d * sol.primal(j);
  }
  sol.dual_objective = dual_obj;
  return sol;
}

void write_lp_format(std::ostream& os, const LinearProgram& lp) {
  lp.check();
  auto name = [&](Eigen::Index j) {
    return lp.names.empty() ? "x" + std::to_string(j) : lp.names[static_cast<std::size_t>(j)];
  };
  auto terms = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    bool any = false;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (row(j) == 0.0) continue;
      os << (row(j) < 0 ? " - " : (any ? " + " : " ")) << std::abs(row(j)) << ' ' << name(j);
      any = true;
    }
    if (!any) os << " 0 " << name(0);
  };
  const auto old_precision = os.precision(17);
  os << "\\ hfmdp linear program\nMinimize\n obj:";
  terms(lp.cost.transpose());
  os << "\nSubject To\n";
  for (Eigen::Index i = 0; i < lp.ge_rows(); ++i) {
    os << " g" << i << ':';
    terms(lp.a_ge.row(i));
    os << " >= " << lp.b_ge(i) << '\n';
  }
  for (Eigen::Index i = 0; i < lp.eq_rows(); ++i) {
    os << " e" << i << ':';
    terms(lp.a_eq.row(i));
    os << " = " << lp.b_eq(i) << '\n';
  }
  os << "Bounds\n";
  for (Eigen::Index j = 0; j < lp.variable_count(); ++j) {
    const double lo = lp.lower(j), hi = lp.upper(j);
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << ' ' << name(j) << " free\n";
      continue;
    }
    os << ' ';
    if (std::isfinite(lo)) os << lo;
    else os << "-inf";
    os << " <= " << name(j) << " <= ";
    if (std::isfinite(hi)) os << hi;
    else os << "+inf";
    os << '\n';
  }
  os << "End\n";
  os.precision(old_precision);
}

}  // namespace hfmdp
