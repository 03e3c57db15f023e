#include "cyclomdp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

int LinearProgram::add_variable(double cost, double lo, double hi) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  return num_vars++;
}

void LinearProgram::add_row(RowSense sense, double rhs,
                            std::span<const int> index,
                            std::span<const double> value) {
  require(index.size() == value.size(), "add_row: index/value size mismatch");
  Row row;
  row.sense = sense;
  row.rhs = rhs;
  row.index.assign(index.begin(), index.end());
  row.value.assign(value.begin(), value.end());
  rows.push_back(std::move(row));
}

void LinearProgram::validate() const {
  require(num_vars > 0, "LinearProgram: no variables");
  require(static_cast<int>(objective.size()) == num_vars &&
              static_cast<int>(lower.size()) == num_vars &&
              static_cast<int>(upper.size()) == num_vars,
          "LinearProgram: objective/bound arrays inconsistent with num_vars");
  for (int j = 0; j < num_vars; ++j) {
    require(std::isfinite(objective[j]),
            strf("LinearProgram: objective[%d] not finite", j));
    require(!std::isnan(lower[j]) && !std::isnan(upper[j]) &&
                lower[j] < kInfinity && upper[j] > -kInfinity,
            strf("LinearProgram: bounds of variable %d malformed", j));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    require(std::isfinite(row.rhs),
            strf("LinearProgram: rhs of row %zu not finite", i));
    require(row.index.size() == row.value.size(),
            strf("LinearProgram: row %zu index/value mismatch", i));
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      require(row.index[k] >= 0 && row.index[k] < num_vars,
              strf("LinearProgram: row %zu references variable %d", i,
                   row.index[k]));
      require(std::isfinite(row.value[k]),
              strf("LinearProgram: row %zu has non-finite coefficient", i));
    }
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Eigen::VectorXd;

// Canonical form: min c.x  s.t.  A x = b,  l <= x <= u, after substituting
// fixed variables and variables that appear in no row.
struct Canonical {
  SpMat A;  // m x n, column-major
  VectorXd b, c, l, u;
  int num_orig = 0;                 // variables in the caller's program
  std::vector<int> canon_of_orig;   // -1 if eliminated in presolve
  VectorXd presolved_value;         // values of eliminated variables
  double fixed_cost = 0.0;
  bool presolve_infeasible = false;
  bool presolve_unbounded = false;
  std::string presolve_message;
};

Canonical canonicalize(const LinearProgram& lp) {
  Canonical cn;
  const int n0 = lp.num_vars;
  cn.num_orig = n0;
  cn.canon_of_orig.assign(n0, -1);
  cn.presolved_value = VectorXd::Zero(n0);

  std::vector<int> row_count(n0, 0);
  for (const auto& row : lp.rows)
    for (std::size_t k = 0; k < row.index.size(); ++k)
      if (row.value[k] != 0.0) ++row_count[row.index[k]];

  // Classify original variables: kept, fixed, or bound-only.
  int n = 0;
  for (int j = 0; j < n0; ++j) {
    double lo = lp.lower[j], hi = lp.upper[j];
    if (lo > hi + 1e-12) {
      cn.presolve_infeasible = true;
      cn.presolve_message =
          strf("variable %d has lower bound %g above upper bound %g", j, lo, hi);
      return cn;
    }
    if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-14) {
      cn.presolved_value[j] = 0.5 * (lo + hi);
      cn.fixed_cost += lp.objective[j] * cn.presolved_value[j];
      continue;
    }
    if (row_count[j] == 0) {
      // Variable appears in no constraint: minimize its cost term alone.
      double cj = lp.objective[j];
      double v;
      if (cj > 0) {
        if (!std::isfinite(lo)) {
          cn.presolve_unbounded = true;
          cn.presolve_message = strf(
              "variable %d has positive cost, no constraints, no lower bound",
              j);
          return cn;
        }
        v = lo;
      } else if (cj < 0) {
        if (!std::isfinite(hi)) {
          cn.presolve_unbounded = true;
          cn.presolve_message = strf(
              "variable %d has negative cost, no constraints, no upper bound",
              j);
          return cn;
        }
        v = hi;
      } else {
        v = std::clamp(0.0, lo, hi);
      }
      cn.presolved_value[j] = v;
      cn.fixed_cost += cj * v;
      continue;
    }
    cn.canon_of_orig[j] = n++;
  }

  const int num_slack =
      static_cast<int>(std::count_if(lp.rows.begin(), lp.rows.end(),
                                     [](const LinearProgram::Row& r) {
                                       return r.sense != RowSense::Equal;
                                     }));
  const int m = static_cast<int>(lp.rows.size());
  const int ntot = n + num_slack;

  cn.c = VectorXd::Zero(ntot);
  cn.l = VectorXd::Constant(ntot, -kInfinity);
  cn.u = VectorXd::Constant(ntot, kInfinity);
  for (int j = 0; j < n0; ++j) {
    int cj = cn.canon_of_orig[j];
    if (cj < 0) continue;
    cn.c[cj] = lp.objective[j];
    cn.l[cj] = lp.lower[j];
    cn.u[cj] = lp.upper[j];
  }

  cn.b = VectorXd::Zero(m);
  std::vector<Triplet> trips;
  int slack = n;
  for (int i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    double rhs = row.rhs;
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      int j = row.index[k];
      double a = row.value[k];
      if (a == 0.0) continue;
      int cj = cn.canon_of_orig[j];
      if (cj >= 0)
        trips.emplace_back(i, cj, a);
      else
        rhs -= a * cn.presolved_value[j];
    }
    cn.b[i] = rhs;
    bool has_entry = false;
    for (std::size_t k = 0; k < row.index.size(); ++k)
      if (row.value[k] != 0.0 && cn.canon_of_orig[row.index[k]] >= 0)
        has_entry = true;
    if (!has_entry && row.sense == RowSense::Equal &&
        std::abs(rhs) > 1e-9 * (1.0 + std::abs(row.rhs))) {
      cn.presolve_infeasible = true;
      cn.presolve_message =
          strf("row %d reduces to 0 = %g after presolve", i, rhs);
      return cn;
    }
    if (row.sense == RowSense::LessEqual) {
      trips.emplace_back(i, slack, 1.0);
      cn.l[slack] = 0.0;
      ++slack;
    } else if (row.sense == RowSense::GreaterEqual) {
      trips.emplace_back(i, slack, 1.0);
      cn.u[slack] = 0.0;
      ++slack;
    }
  }
  cn.A.resize(m, ntot);
  cn.A.setFromTriplets(trips.begin(), trips.end());
  cn.A.makeCompressed();
  return cn;
}

struct Scaling {
  VectorXd row_scale, col_scale;  // A_hat = R A S
  double cost_scale = 1.0;
  double rhs_scale = 1.0;
};

// Ruiz equilibration: iteratively scale rows and columns of A toward unit
// infinity norm. Deterministic.
Scaling equilibrate(SpMat& A, VectorXd& b, VectorXd& c, VectorXd& l,
                    VectorXd& u) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Scaling sc;
  sc.row_scale = VectorXd::Ones(m);
  sc.col_scale = VectorXd::Ones(n);
  for (int pass = 0; pass < 10; ++pass) {
    VectorXd rmax = VectorXd::Zero(m), cmax = VectorXd::Zero(n);
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        double a = std::abs(it.value());
        rmax[it.row()] = std::max(rmax[it.row()], a);
        cmax[j] = std::max(cmax[j], a);
      }
    double worst = 0.0;
    VectorXd rs(m), cs(n);
    for (int i = 0; i < m; ++i) {
      rs[i] = rmax[i] > 0 ? 1.0 / std::sqrt(rmax[i]) : 1.0;
      worst = std::max(worst, std::abs(1.0 - rmax[i]));
    }
    for (int j = 0; j < n; ++j) {
      cs[j] = cmax[j] > 0 ? 1.0 / std::sqrt(cmax[j]) : 1.0;
      worst = std::max(worst, std::abs(1.0 - cmax[j]));
    }
    if (worst < 1e-4) break;
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it)
        it.valueRef() *= rs[it.row()] * cs[j];
    sc.row_scale.array() *= rs.array();
    sc.col_scale.array() *= cs.array();
  }
  b.array() *= sc.row_scale.array();
  c.array() *= sc.col_scale.array();
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(l[j])) l[j] /= sc.col_scale[j];
    if (std::isfinite(u[j])) u[j] /= sc.col_scale[j];
  }
  sc.cost_scale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  c /= sc.cost_scale;
  double bound_mag = 0.0;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(l[j])) bound_mag = std::max(bound_mag, std::abs(l[j]));
    if (std::isfinite(u[j])) bound_mag = std::max(bound_mag, std::abs(u[j]));
  }
  sc.rhs_scale = std::max({1.0, b.lpNorm<Eigen::Infinity>(), bound_mag});
  b /= sc.rhs_scale;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(l[j])) l[j] /= sc.rhs_scale;
    if (std::isfinite(u[j])) u[j] /= sc.rhs_scale;
  }
  return sc;
}

// Workspace for the regularized augmented system
//   [ -(D + dp I)  A^T ] [dx]   [r1]
//   [      A      dd I ] [dy] = [r2]
// factored with a simplicial LDLT whose pattern is analyzed once.
class KktSolver {
 public:
  KktSolver(const SpMat& A, double dp, double dd)
      : A_(A),
        m_(static_cast<int>(A.rows())),
        n_(static_cast<int>(A.cols())),
        dp_(dp),
        dd_(dd) {
    std::vector<Triplet> trips;
    trips.reserve(A_.nonZeros() + n_ + m_);
    for (int j = 0; j < n_; ++j) {
      trips.emplace_back(j, j, -1.0);
      for (SpMat::InnerIterator it(A_, j); it; ++it)
        trips.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
    }
    for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, dd_);
    K_.resize(n_ + m_, n_ + m_);
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();
    // The diagonal is the first stored entry of every column (row indices
    // are sorted; the sub-diagonal block sits below row n_).
    diag_pos_.resize(n_ + m_);
    for (int j = 0; j < n_ + m_; ++j) diag_pos_[j] = K_.outerIndexPtr()[j];
    ldlt_.analyzePattern(K_);
  }

  // d >= 0 is the barrier diagonal for the variables. Escalates the static
  // regularization when cancellation produces an exact zero pivot.
  bool factorize(const VectorXd& d) {
    d_ = d;
    for (double boost = 1.0; boost <= 1e6; boost *= 100.0) {
      for (int j = 0; j < n_; ++j)
        K_.valuePtr()[diag_pos_[j]] = -(d[j] + dp_ * boost);
      for (int i = 0; i < m_; ++i)
        K_.valuePtr()[diag_pos_[n_ + i]] = dd_ * boost;
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  // Solves the *unregularized* system by iterative refinement against the
  // regularized factorization.
  void solve(const VectorXd& r1, const VectorXd& r2, int refine_steps,
             VectorXd* dx, VectorXd* dy) const {
    VectorXd rhs(n_ + m_);
    rhs.head(n_) = r1;
    rhs.tail(m_) = r2;
    VectorXd sol = ldlt_.solve(rhs);
    for (int pass = 0; pass < refine_steps; ++pass) {
      VectorXd resid(n_ + m_);
      // residual against the unregularized matrix
      VectorXd x = sol.head(n_), y = sol.tail(m_);
      resid.head(n_) = r1 + d_.cwiseProduct(x) - A_.transpose() * y;
      resid.tail(m_) = r2 - A_ * x;
      if (resid.lpNorm<Eigen::Infinity>() <
          1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
        break;
      sol += ldlt_.solve(resid);
    }
    *dx = sol.head(n_);
    *dy = sol.tail(m_);
  }

 private:
  const SpMat& A_;
  int m_, n_;
  double dp_, dd_;
  SpMat K_;
  VectorXd d_;
  std::vector<int> diag_pos_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

struct IpmState {
  VectorXd x, y, z, w;  // z: duals of lower bounds, w: duals of upper bounds
  VectorXd g, h;        // g = x - l, h = u - x (only where bounds are finite)
};

SolveResult solve_canonical(const Canonical& cn, const SolverOptions& opts) {
  SolveResult res;
  const int m = static_cast<int>(cn.A.rows());
  const int n = static_cast<int>(cn.A.cols());

  SpMat A = cn.A;
  VectorXd b = cn.b, c = cn.c, l = cn.l, u = cn.u;
  Scaling sc = equilibrate(A, b, c, l, u);

  std::vector<bool> has_lo(n), has_up(n);
  int num_bounded = 0;
  for (int j = 0; j < n; ++j) {
    has_lo[j] = std::isfinite(l[j]);
    has_up[j] = std::isfinite(u[j]);
    num_bounded += has_lo[j] + has_up[j];
  }

  KktSolver kkt(A, opts.primal_regularization, opts.dual_regularization);

  // Starting point: push x inside its bounds, unit duals.
  IpmState s;
  s.x = VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (has_lo[j] && has_up[j])
      s.x[j] = 0.5 * (l[j] + u[j]);
    else if (has_lo[j])
      s.x[j] = l[j] + 1.0;
    else if (has_up[j])
      s.x[j] = u[j] - 1.0;
  }
  s.y = VectorXd::Zero(m);
  s.z = VectorXd::Zero(n);
  s.w = VectorXd::Zero(n);
  s.g = VectorXd::Ones(n);
  s.h = VectorXd::Ones(n);
  for (int j = 0; j < n; ++j) {
    if (has_lo[j]) {
      s.g[j] = std::max(s.x[j] - l[j], 0.5);
      s.x[j] = l[j] + s.g[j];
      s.z[j] = 1.0;
    }
    if (has_up[j]) {
      s.h[j] = std::max(u[j] - s.x[j], 0.5);
      if (!has_lo[j]) s.x[j] = u[j] - s.h[j];
      s.h[j] = u[j] - s.x[j];
      if (s.h[j] <= 0) {  // tight box; recenter
        s.x[j] = 0.5 * (l[j] + u[j]);
        s.g[j] = s.x[j] - l[j];
        s.h[j] = u[j] - s.x[j];
      }
      s.w[j] = 1.0;
    }
  }

  const double bnorm = 1.0 + b.lpNorm<Eigen::Infinity>();
  const double cnorm = 1.0 + c.lpNorm<Eigen::Infinity>();

  auto mu_of = [&](const IpmState& st) {
    if (num_bounded == 0) return 0.0;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      if (has_lo[j]) acc += st.g[j] * st.z[j];
      if (has_up[j]) acc += st.h[j] * st.w[j];
    }
    return acc / num_bounded;
  };

  auto dual_objective = [&](const IpmState& st) {
    double dobj = b.dot(st.y);
    for (int j = 0; j < n; ++j) {
      if (has_lo[j]) dobj += l[j] * st.z[j];
      if (has_up[j]) dobj -= u[j] * st.w[j];
    }
    return dobj;
  };

  double mu0 = mu_of(s);
  double best_metric = kInfinity;
  int stall_count = 0;
  SolveStatus status = SolveStatus::IterationLimit;
  std::string message;
  // Best iterate satisfying the loose tolerances; restored if later
  // iterations break down numerically while polishing.
  IpmState banked;
  double banked_metric = kInfinity;
  bool have_banked = false;

  VectorXd rp(m), rd(n), dvec(n);
  VectorXd dx_aff(n), dy_aff(m), dz_aff(n), dw_aff(n);
  VectorXd dx(n), dy(m), dz(n), dw(n);
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    rp = b - A * s.x;
    rd = c - A.transpose() * s.y - s.z + s.w;
    double mu = mu_of(s);
    double rel_p = rp.lpNorm<Eigen::Infinity>() / bnorm;
    double rel_d = rd.lpNorm<Eigen::Infinity>() / cnorm;
    double pobj = c.dot(s.x);
    double dobj = dual_objective(s);
    double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    // Residuals measured against the iterate scale classify divergence:
    // an unbounded ray keeps rp small relative to ||x|| while ||x|| blows up.
    double xscale = bnorm + s.x.lpNorm<Eigen::Infinity>();
    double yscale = cnorm + std::max({s.y.lpNorm<Eigen::Infinity>(),
                                      s.z.lpNorm<Eigen::Infinity>(),
                                      s.w.lpNorm<Eigen::Infinity>()});
    double rp_scaled = rp.lpNorm<Eigen::Infinity>() / xscale;
    double rd_scaled = rd.lpNorm<Eigen::Infinity>() / yscale;

    if (opts.verbose)
      std::fprintf(stderr,
                   "ipm %3d: mu=%.2e rp=%.2e rd=%.2e gap=%.2e pobj=%.8e\n",
                   iter, mu, rel_p, rel_d, rel_gap, pobj);
    bool tight = rel_p <= opts.primal_tol && rel_d <= opts.dual_tol &&
                 rel_gap <= opts.gap_tol;
    bool loose = rel_p <= opts.primal_tol_loose &&
                 rel_d <= opts.dual_tol_loose &&
                 rel_gap <= opts.gap_tol_loose;
    // progress = any of the three convergence measures still improving
    double metric = std::max({rel_p / opts.primal_tol_loose,
                              rel_d / opts.dual_tol_loose,
                              rel_gap / opts.gap_tol_loose});
    if (metric < best_metric * 0.95) {
      best_metric = metric;
      stall_count = 0;
    } else {
      ++stall_count;
    }
    if (loose && metric < banked_metric) {
      banked = s;
      banked_metric = metric;
      have_banked = true;
    }
    if (tight ||
        (loose && (stall_count >= 4 || mu < 1e-12 * std::max(1.0, mu0)))) {
      status = SolveStatus::Optimal;
      break;
    }

    // Divergence-based classification of pathological problems.
    double div = opts.divergence_threshold;
    if (dobj > div && rd_scaled <= 1e-9) {
      status = SolveStatus::Infeasible;
      message = "dual objective diverging with small dual residual";
      break;
    }
    if (pobj < -div && rp_scaled <= 1e-9) {
      status = SolveStatus::Unbounded;
      message = "primal objective diverging with small primal residual";
      break;
    }
    if (num_bounded > 0 && mu < 1e-12 * std::max(1.0, mu0) && !loose &&
        (rel_p > opts.primal_tol_loose || rel_d > opts.dual_tol_loose)) {
      // complementarity is exhausted but a residual is still large
      if (have_banked) {
        s = banked;
        status = SolveStatus::Optimal;
        break;
      }
      if (rel_p > 1e2 * opts.primal_tol_loose && rel_p > 1e3 * rel_d) {
        status = SolveStatus::Infeasible;
        message = "complementarity vanished with stalled primal residual";
      } else if (rel_d > 1e2 * opts.dual_tol_loose) {
        status = SolveStatus::Unbounded;
        message = "complementarity vanished with stalled dual residual";
      } else {
        status = SolveStatus::IterationLimit;
        message = "numerical stall";
      }
      break;
    }
    if (stall_count >= 12) {
      if (loose || have_banked) {
        if (!loose) s = banked;
        status = SolveStatus::Optimal;
      } else if (rd_scaled <= 1e-9 && rel_p > 1e2 * opts.primal_tol_loose) {
        status = SolveStatus::Infeasible;
        message = "primal residual stalled while the dual converged";
      } else if (rp_scaled <= 1e-9 && rel_d > 1e2 * opts.dual_tol_loose) {
        status = SolveStatus::Unbounded;
        message = "dual residual stalled while the primal converged";
      } else {
        status = SolveStatus::IterationLimit;
        message = strf("stalled at rel_p=%.2e rel_d=%.2e gap=%.2e", rel_p,
                       rel_d, rel_gap);
      }
      break;
    }

    for (int j = 0; j < n; ++j) {
      double d = 0.0;
      if (has_lo[j]) d += s.z[j] / s.g[j];
      if (has_up[j]) d += s.w[j] / s.h[j];
      dvec[j] = d;
    }
    if (!kkt.factorize(dvec)) {
      status = SolveStatus::IterationLimit;
      message = "KKT factorization failed";
      break;
    }

    // Predictor (affine scaling) direction: targets mu = 0.
    VectorXd r1 = rd + s.z - s.w;  // rd - g^-1(-gz) + h^-1(-hw)
    for (int j = 0; j < n; ++j) {
      if (!has_lo[j] && !has_up[j]) r1[j] = rd[j];
    }
    kkt.solve(r1, rp, opts.refinement_steps, &dx_aff, &dy_aff);
    for (int j = 0; j < n; ++j) {
      dz_aff[j] = has_lo[j] ? (-s.g[j] * s.z[j] - s.z[j] * dx_aff[j]) / s.g[j]
                            : 0.0;
      dw_aff[j] = has_up[j] ? (-s.h[j] * s.w[j] + s.w[j] * dx_aff[j]) / s.h[j]
                            : 0.0;
    }

    auto max_step_primal = [&](const VectorXd& deltax) {
      double a = 1.0;
      for (int j = 0; j < n; ++j) {
        if (has_lo[j] && deltax[j] < 0) a = std::min(a, -s.g[j] / deltax[j]);
        if (has_up[j] && deltax[j] > 0) a = std::min(a, s.h[j] / deltax[j]);
      }
      return a;
    };
    auto max_step_dual = [&](const VectorXd& deltaz, const VectorXd& deltaw) {
      double a = 1.0;
      for (int j = 0; j < n; ++j) {
        if (has_lo[j] && deltaz[j] < 0) a = std::min(a, -s.z[j] / deltaz[j]);
        if (has_up[j] && deltaw[j] < 0) a = std::min(a, -s.w[j] / deltaw[j]);
      }
      return a;
    };

    double sigma = 0.0;
    if (num_bounded > 0 && mu > 0) {
      double ap = max_step_primal(dx_aff);
      double ad = max_step_dual(dz_aff, dw_aff);
      double mu_aff = 0.0;
      for (int j = 0; j < n; ++j) {
        if (has_lo[j])
          mu_aff += (s.g[j] + ap * dx_aff[j]) * (s.z[j] + ad * dz_aff[j]);
        if (has_up[j])
          mu_aff += (s.h[j] - ap * dx_aff[j]) * (s.w[j] + ad * dw_aff[j]);
      }
      mu_aff /= num_bounded;
      sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-8, 1.0);
    }

    // Corrector: recenters to sigma*mu and compensates the affine product.
    double target = sigma * mu;
    for (int j = 0; j < n; ++j) {
      double v = rd[j];
      if (has_lo[j])
        v -= (target - s.g[j] * s.z[j] - dx_aff[j] * dz_aff[j]) / s.g[j];
      if (has_up[j])
        v += (target - s.h[j] * s.w[j] + dx_aff[j] * dw_aff[j]) / s.h[j];
      r1[j] = v;
    }
    kkt.solve(r1, rp, opts.refinement_steps, &dx, &dy);
    for (int j = 0; j < n; ++j) {
      dz[j] = has_lo[j]
                  ? (target - s.g[j] * s.z[j] - dx_aff[j] * dz_aff[j] -
                     s.z[j] * dx[j]) /
                        s.g[j]
                  : 0.0;
      dw[j] = has_up[j]
                  ? (target - s.h[j] * s.w[j] + dx_aff[j] * dw_aff[j] +
                     s.w[j] * dx[j]) /
                        s.h[j]
                  : 0.0;
    }

    double frac = std::max(0.995, 1.0 - 10.0 * mu);
    frac = std::min(frac, 0.99995);
    double ap = std::min(1.0, frac * max_step_primal(dx));
    double ad = std::min(1.0, frac * max_step_dual(dz, dw));
    if (num_bounded == 0) ap = ad = 1.0;

    s.x += ap * dx;
    s.y += ad * dy;
    for (int j = 0; j < n; ++j) {
      if (has_lo[j]) {
        s.g[j] = s.x[j] - l[j];
        s.z[j] += ad * dz[j];
      }
      if (has_up[j]) {
        s.h[j] = u[j] - s.x[j];
        s.w[j] += ad * dw[j];
      }
    }
  }
  if (status == SolveStatus::IterationLimit && have_banked) {
    s = banked;
    status = SolveStatus::Optimal;
  }
  if (iter >= opts.max_iterations && status == SolveStatus::IterationLimit &&
      message.empty())
    message = strf("no convergence in %d iterations", opts.max_iterations);

  // Map back to the caller's variable space.
  res.status = status;
  res.iterations = iter;
  res.message = message;
  res.x = cn.presolved_value;
  double obj_scale = sc.cost_scale * sc.rhs_scale;
  for (int j = 0; j < cn.num_orig; ++j) {
    int cj = cn.canon_of_orig[j];
    if (cj >= 0) res.x[j] = s.x[cj] * sc.col_scale[cj] * sc.rhs_scale;
  }
  res.objective = c.dot(s.x) * obj_scale + cn.fixed_cost;
  res.dual_objective = dual_objective(s) * obj_scale + cn.fixed_cost;
  res.primal_residual = (b - A * s.x).lpNorm<Eigen::Infinity>() / bnorm;
  res.dual_residual =
      (c - A.transpose() * s.y - s.z + s.w).lpNorm<Eigen::Infinity>() / cnorm;
  res.gap = std::abs(res.objective - res.dual_objective) /
            (1.0 + std::abs(res.objective));
  return res;
}

}  // namespace

SolveResult solve_lp(const LinearProgram& lp, const SolverOptions& opts) {
  lp.validate();
  Canonical cn = canonicalize(lp);

  SolveResult res;
  if (cn.presolve_infeasible || cn.presolve_unbounded) {
    res.status = cn.presolve_infeasible ? SolveStatus::Infeasible
                                        : SolveStatus::Unbounded;
    res.message = cn.presolve_message;
    res.x = cn.presolved_value;
    return res;
  }

  if (cn.A.cols() == 0) {
    // Everything was eliminated; rows must be trivially consistent.
    for (int i = 0; i < cn.b.size(); ++i) {
      const auto sense = lp.rows[i].sense;
      double r = cn.b[i];
      bool ok = (sense == RowSense::Equal && std::abs(r) <= 1e-9) ||
                (sense == RowSense::LessEqual && r >= -1e-9) ||
                (sense == RowSense::GreaterEqual && r <= 1e-9);
      if (!ok) {
        res.status = SolveStatus::Infeasible;
        res.message = strf("row %d inconsistent after presolve", i);
        res.x = cn.presolved_value;
        return res;
      }
    }
    res.status = SolveStatus::Optimal;
    res.x = cn.presolved_value;
    res.objective = cn.fixed_cost;
    res.dual_objective = cn.fixed_cost;
    res.primal_residual = res.dual_residual = res.gap = 0.0;
    return res;
  }

  return solve_canonical(cn, opts);
}

void write_lp_format(const LinearProgram& lp, std::ostream& os) {
  lp.validate();
  os << "Minimize\n obj:";
  for (int j = 0; j < lp.num_vars; ++j)
    if (lp.objective[j] != 0.0)
      os << strf(" %+.17g x%d", lp.objective[j], j);
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto& row = lp.rows[i];
    os << strf(" c%zu:", i);
    for (std::size_t k = 0; k < row.index.size(); ++k)
      os << strf(" %+.17g x%d", row.value[k], row.index[k]);
    const char* rel = row.sense == RowSense::LessEqual   ? "<="
                      : row.sense == RowSense::Equal     ? "="
                                                         : ">=";
    os << strf(" %s %.17g\n", rel, row.rhs);
  }
  os << "Bounds\n";
  for (int j = 0; j < lp.num_vars; ++j) {
    double lo = lp.lower[j], hi = lp.upper[j];
    if (lo == 0.0 && hi == kInfinity) continue;
    if (lo == -kInfinity && hi == kInfinity) {
      os << strf(" x%d free\n", j);
    } else if (lo == -kInfinity) {
      os << strf(" -inf <= x%d <= %.17g\n", j, hi);
    } else if (hi == kInfinity) {
      os << strf(" x%d >= %.17g\n", j, lo);
    } else {
      os << strf(" %.17g <= x%d <= %.17g\n", lo, j, hi);
    }
  }
  os << "End\n";
}

}  // namespace cyclomdp
