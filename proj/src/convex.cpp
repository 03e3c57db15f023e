#include "cyclomdp/convex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

void ConvexProgram::set_dimension(int n) {
  num_vars = n;
  lower.assign(n, -kInfinity);
  upper.assign(n, kInfinity);
}

void ConvexProgram::add_affine_ge(const Eigen::SparseVector<double>& a,
                                  double b) {
  ConeRow row;
  row.u.coeffs.resize(num_vars);
  row.v.coeffs.resize(num_vars);
  row.w.coeffs = a;
  row.w.offset = b;
  cones.push_back(std::move(row));
}

void ConvexProgram::add_cone(Affine u, Affine v, Affine w) {
  cones.push_back(ConeRow{std::move(u), std::move(v), std::move(w)});
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BarrierEval {
  double value = 0.0;
  VectorXd grad;     // in x space
  bool interior = true;
};

BarrierEval eval_barrier(const ConvexProgram& cp, const VectorXd& x) {
  BarrierEval out;
  out.grad = VectorXd::Zero(cp.num_vars);
  for (int j = 0; j < cp.num_vars; ++j) {
    if (std::isfinite(cp.lower[j])) {
      double slack = x[j] - cp.lower[j];
      if (slack <= 0) {
        out.interior = false;
        return out;
      }
      out.value -= std::log(slack);
      out.grad[j] -= 1.0 / slack;
    }
    if (std::isfinite(cp.upper[j])) {
      double slack = cp.upper[j] - x[j];
      if (slack <= 0) {
        out.interior = false;
        return out;
      }
      out.value -= std::log(slack);
      out.grad[j] += 1.0 / slack;
    }
  }
  for (const auto& cone : cp.cones) {
    double u = cone.u.eval(x), v = cone.v.eval(x), w = cone.w.eval(x);
    double s = w * w - u * u - v * v;
    if (w <= 0 || s <= 0) {
      out.interior = false;
      return out;
    }
    out.value -= std::log(s);
    // grad(-log s) = -(2w gw - 2u gu - 2v gv) / s
    double cw = -2.0 * w / s, cu = 2.0 * u / s, cv = 2.0 * v / s;
    for (Eigen::SparseVector<double>::InnerIterator it(cone.w.coeffs); it;
         ++it)
      out.grad[it.index()] += cw * it.value();
    for (Eigen::SparseVector<double>::InnerIterator it(cone.u.coeffs); it;
         ++it)
      out.grad[it.index()] += cu * it.value();
    for (Eigen::SparseVector<double>::InnerIterator it(cone.v.coeffs); it;
         ++it)
      out.grad[it.index()] += cv * it.value();
  }
  return out;
}

// Largest step alpha such that x + alpha*dir stays strictly inside every
// bound and cone (before the fraction-to-boundary factor is applied).
double max_feasible_step(const ConvexProgram& cp, const VectorXd& x,
                         const VectorXd& dir) {
  double alpha = kInfinity;
  for (int j = 0; j < cp.num_vars; ++j) {
    if (std::isfinite(cp.lower[j]) && dir[j] < 0)
      alpha = std::min(alpha, (cp.lower[j] - x[j]) / dir[j]);
    if (std::isfinite(cp.upper[j]) && dir[j] > 0)
      alpha = std::min(alpha, (cp.upper[j] - x[j]) / dir[j]);
  }
  for (const auto& cone : cp.cones) {
    double u0 = cone.u.eval(x), v0 = cone.v.eval(x), w0 = cone.w.eval(x);
    double du = cone.u.coeffs.dot(dir), dv = cone.v.coeffs.dot(dir),
           dw = cone.w.coeffs.dot(dir);
    if (dw < 0) alpha = std::min(alpha, -w0 / dw);
    // s(alpha) = (w0+a*dw)^2 - (u0+a*du)^2 - (v0+a*dv)^2, s(0) > 0
    double qa = dw * dw - du * du - dv * dv;
    double qb = 2.0 * (w0 * dw - u0 * du - v0 * dv);
    double qc = w0 * w0 - u0 * u0 - v0 * v0;
    double disc = qb * qb - 4.0 * qa * qc;
    if (std::abs(qa) < 1e-300) {
      if (qb < 0) alpha = std::min(alpha, -qc / qb);
      continue;
    }
    if (disc >= 0) {
      double sq = std::sqrt(disc);
      double r1 = (-qb - sq) / (2.0 * qa);
      double r2 = (-qb + sq) / (2.0 * qa);
      if (r1 > r2) std::swap(r1, r2);
      if (r1 > 0)
        alpha = std::min(alpha, r1);
      else if (r2 > 0 && qa < 0)
        alpha = std::min(alpha, r2);
      else if (r2 > 0 && qa > 0 && qc < 0)
        alpha = std::min(alpha, r2);
    }
  }
  return alpha;
}

int count_barriers(const ConvexProgram& cp) {
  int m = static_cast<int>(cp.cones.size());
  for (int j = 0; j < cp.num_vars; ++j) {
    if (std::isfinite(cp.lower[j])) ++m;
    if (std::isfinite(cp.upper[j])) ++m;
  }
  return m;
}

}  // namespace

SolveResult solve_convex(const ConvexProgram& cp, const VectorXd& start,
                         double tol, const ConvexOptions& opts) {
  require(cp.num_vars > 0 && cp.objective, "solve_convex: empty program");
  require(start.size() == cp.num_vars, "solve_convex: start dimension");

  const int n = cp.num_vars;
  if (cp.eq_lhs.rows() > 0) {
    double eq_resid =
        (cp.eq_lhs * start - cp.eq_rhs).lpNorm<Eigen::Infinity>();
    require(eq_resid <= 1e-8,
            strf("solve_convex: start violates equalities (residual %.3e)",
                 eq_resid));
  }
  require(eval_barrier(cp, start).interior,
          "solve_convex: start is not strictly interior");

  // Null-space basis of the equality system (orthonormal, rank-aware).
  MatrixXd N;
  if (cp.eq_lhs.rows() == 0) {
    N = MatrixXd::Identity(n, n);
  } else {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(cp.eq_lhs.transpose());
    int rank = static_cast<int>(qr.rank());
    MatrixXd Q = qr.householderQ();
    N = Q.rightCols(n - rank);
  }
  const int k = static_cast<int>(N.cols());
  const int m_barrier = count_barriers(cp);

  SolveResult res;
  res.x = start;
  if (k == 0) {  // equality system pins x completely
    res.status = SolveStatus::Optimal;
    res.objective = cp.objective(res.x, nullptr);
    res.kkt_residual = 0.0;
    return res;
  }

  VectorXd x = start;
  double eta = 1.0;
  int total_iters = 0;
  double stationarity = kInfinity;
  double best_certificate = kInfinity;
  VectorXd best_x;
  int flat_stages = 0;

  // Scaled merit f + Phi/eta: same minimizer as eta*f + Phi, but O(1)
  // values and gradients at every stage, so line-search decreases stay
  // measurable in double precision.
  VectorXd fgrad(n);
  auto merit = [&](const VectorXd& xx, VectorXd* grad_x) {
    double fv = cp.objective(xx, grad_x ? &fgrad : nullptr);
    BarrierEval be = eval_barrier(cp, xx);
    if (!be.interior) return kInfinity;
    if (grad_x) *grad_x = fgrad + be.grad / eta;
    return fv + be.value / eta;
  };

  for (int stage = 0; stage < opts.max_barrier_stages; ++stage) {
    // BFGS on theta with x = x_stage + N theta.
    MatrixXd Hinv = MatrixXd::Identity(k, k);
    VectorXd gx(n);
    double mval = merit(x, &gx);
    require(std::isfinite(mval), "solve_convex: merit not finite at start");
    VectorXd g = N.transpose() * gx;
    int inner = 0;
    for (; inner < opts.max_inner_iterations; ++inner) {
      stationarity = g.lpNorm<Eigen::Infinity>();
      if (stationarity <= 0.3 * tol) break;
      VectorXd p = -(Hinv * g);
      if (p.dot(g) >= 0) {  // reset on loss of descent
        Hinv.setIdentity();
        p = -g;
      }
      VectorXd dirx = N * p;
      double amax = max_feasible_step(cp, x, dirx);
      double alpha = std::min(1.0, 0.99 * amax);
      double slope = g.dot(p);
      double m_new = kInfinity;
      VectorXd x_new;
      bool armijo = false;
      for (int bt = 0; bt < 60; ++bt) {
        x_new = x + alpha * dirx;
        m_new = merit(x_new, nullptr);
        if (m_new <= mval + 1e-4 * alpha * slope) {
          armijo = true;
          break;
        }
        alpha *= 0.5;
      }
      VectorXd gx_new(n), g_new;
      if (armijo) {
        merit(x_new, &gx_new);
        g_new = N.transpose() * gx_new;
      } else {
        // Merit decreases smaller than double-precision noise: fall back to
        // accepting the largest step that still shrinks the gradient norm.
        bool found = false;
        alpha = std::min(1.0, 0.99 * amax);
        for (int bt = 0; bt < 40; ++bt) {
          x_new = x + alpha * dirx;
          m_new = merit(x_new, &gx_new);
          if (std::isfinite(m_new) &&
              m_new <= mval + 64.0 * 2.2e-16 * (1.0 + std::abs(mval))) {
            g_new = N.transpose() * gx_new;
            if (g_new.norm() < g.norm() * (1.0 - 1e-12)) {
              found = true;
              break;
            }
          }
          alpha *= 0.5;
        }
        if (!found) break;  // genuinely stuck at this stage
      }
      // merit must not increase across accepted steps (beyond noise)
      require(m_new <= mval + 1e-9 * (1.0 + std::abs(mval)),
              "solve_convex: internal error, merit increased");
      VectorXd sdiff = alpha * p;
      VectorXd ydiff = g_new - g;
      double sy = sdiff.dot(ydiff);
      if (sy > 1e-12 * sdiff.norm() * ydiff.norm()) {
        // BFGS inverse update
        VectorXd Hy = Hinv * ydiff;
        double yHy = ydiff.dot(Hy);
        Hinv += ((sy + yHy) / (sy * sy)) * (sdiff * sdiff.transpose()) -
                (Hy * sdiff.transpose() + sdiff * Hy.transpose()) / sy;
      }
      x = x_new;
      mval = m_new;
      g = g_new;
    }
    total_iters += inner;

    if (m_barrier == 0) {
      res.status = stationarity <= tol ? SolveStatus::Optimal
                                       : SolveStatus::IterationLimit;
      res.kkt_residual = stationarity;
      best_x = x;
      break;
    }
    // KKT certificate at the barrier multipliers 1/(eta*slack):
    // stationarity is the projected gradient, complementarity is 1/eta per
    // constraint, and iterates are interior by construction.
    double cert = std::max(stationarity, 1.0 / eta);
    if (opts.verbose)
      std::fprintf(stderr,
                   "barrier stage %2d: eta=%.2e inner=%d stationarity=%.3e "
                   "certificate=%.3e\n",
                   stage, eta, inner, stationarity, cert);
    if (cert < best_certificate) {
      best_certificate = cert;
      best_x = x;
      flat_stages = 0;
    } else {
      ++flat_stages;
    }
    if (best_certificate <= tol) {
      res.status = SolveStatus::Optimal;
      break;
    }
    if (flat_stages >= 3) break;  // precision-limited; keep the best point
    eta *= opts.barrier_multiplier;
  }

  if (m_barrier > 0 && res.status != SolveStatus::Optimal &&
      best_certificate <= tol)
    res.status = SolveStatus::Optimal;
  res.x = best_x.size() ? best_x : x;
  res.objective = cp.objective(res.x, nullptr);
  res.kkt_residual = m_barrier > 0 ? best_certificate : res.kkt_residual;
  res.iterations = total_iters;
  if (res.status == SolveStatus::IterationLimit)
    res.message = strf("kkt residual %.3e after %d inner iterations",
                       res.kkt_residual, total_iters);
  return res;
}

}  // namespace cyclomdp
