#include "cyclomdp/chain.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "cyclomdp/convex.hpp"
#include "cyclomdp/error.hpp"

namespace cyclomdp {

int assign_state(const QuantileFamily& family, double t, double x) {
  int state = 1;
  for (const auto& curve : family.curves)
    if (eval_quantile(curve, t) <= x) ++state;
  return state;
}

Eigen::MatrixXd count_transitions(std::span<const double> times,
                                  std::span<const int> states, int num_states,
                                  double step) {
  require(times.size() == states.size(),
          "count_transitions: times/states size mismatch");
  require(times.size() >= 2, "count_transitions: need at least two points");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if (std::abs(times[k + 1] - times[k] - step) > 1e-9 * std::max(1.0, step))
      continue;  // gap
    int i = states[k], j = states[k + 1];
    require(i >= 1 && i <= num_states && j >= 1 && j <= num_states,
            strf("count_transitions: state out of range at index %zu", k));
    counts(i - 1, j - 1) += 1.0;
  }
  return counts;
}

TransitionObservations observe_series(const QuantileFamily& family,
                                      std::span<const Observation> data,
                                      double step) {
  TransitionObservations obs;
  obs.num_states = family.num_states();
  for (std::size_t k = 0; k + 1 < data.size(); ++k) {
    if (std::abs(data[k + 1].t - data[k].t - step) >
        1e-9 * std::max(1.0, step))
      continue;
    obs.records.push_back({data[k].t,
                           assign_state(family, data[k].t, data[k].x),
                           assign_state(family, data[k + 1].t, data[k + 1].x)});
  }
  return obs;
}

HomogeneousEstimate estimate_homogeneous(const Eigen::MatrixXd& counts) {
  const int m = static_cast<int>(counts.rows());
  require(counts.cols() == m, "estimate_homogeneous: counts must be square");
  HomogeneousEstimate est;
  est.matrix = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double total = counts.row(i).sum();
    if (total <= 0.0) {
      est.matrix.row(i).setConstant(1.0 / m);
      est.never_observed.push_back(i + 1);
    } else {
      est.matrix.row(i) = counts.row(i) / total;
    }
  }
  return est;
}

Eigen::MatrixXd sinkhorn_balance(const Eigen::MatrixXd& matrix, double tol,
                                 int max_iter) {
  const int m = static_cast<int>(matrix.rows());
  require(matrix.cols() == m, "sinkhorn_balance: matrix must be square");
  require((matrix.array() >= 0).all(),
          "sinkhorn_balance: matrix must be nonnegative");
  for (int i = 0; i < m; ++i) {
    require(matrix.row(i).sum() > 0,
            strf("sinkhorn_balance: zero row %d", i + 1));
    require(matrix.col(i).sum() > 0,
            strf("sinkhorn_balance: zero column %d", i + 1));
  }
  Eigen::MatrixXd out = matrix;
  double resid = kInfinity;
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i < m; ++i) out.row(i) /= out.row(i).sum();
    for (int j = 0; j < m; ++j) out.col(j) /= out.col(j).sum();
    resid = 0.0;
    for (int i = 0; i < m; ++i) {
      resid = std::max(resid, std::abs(out.row(i).sum() - 1.0));
      resid = std::max(resid, std::abs(out.col(i).sum() - 1.0));
    }
    if (resid <= tol) return out;
  }
  fail(strf("sinkhorn_balance: residual %.3e after %d iterations (tol %.3e)",
            resid, max_iter, tol));
}

Eigen::VectorXd stationary_from_levels(std::span<const double> levels) {
  const int m = static_cast<int>(levels.size()) + 1;
  Eigen::VectorXd pi(m);
  double prev = 0.0;
  for (int i = 0; i < m - 1; ++i) {
    require(levels[i] > prev && levels[i] < 1.0,
            "stationary_from_levels: levels must be increasing in (0,1)");
    pi[i] = levels[i] - prev;
    prev = levels[i];
  }
  pi[m - 1] = 1.0 - prev;
  return pi;
}

namespace {

// gamma is laid out as one block of basis.dimension() coefficients per (i,j)
// pair, i-major.
int gamma_index(int m, int q, int i, int j, int ell) {
  return ((i - 1) * m + (j - 1)) * q + ell;
}

}  // namespace

PeriodicTransitionModel fit_periodic_transitions(
    const TransitionObservations& obs, const Eigen::VectorXd& pi,
    const BasisSpec& basis, const TransitionFitOptions& opts) {
  const int m = obs.num_states;
  require(m >= 2, "fit_periodic_transitions: need at least two states");
  require(pi.size() == m, "fit_periodic_transitions: pi size mismatch");
  require(std::abs(pi.sum() - 1.0) <= 1e-9,
          "fit_periodic_transitions: pi must sum to 1");
  require(!obs.records.empty(), "fit_periodic_transitions: no observations");
  for (int i = 0; i < m; ++i)
    require(pi[i] > 0,
            strf("fit_periodic_transitions: pi[%d] must be positive", i + 1));
  for (const auto& rec : obs.records)
    require(rec.from >= 1 && rec.from <= m && rec.to >= 1 && rec.to <= m,
            "fit_periodic_transitions: observation outside 1..m");

  const int q = basis.dimension();
  const int nvar = m * m * q;

  // Precompute basis rows grouped by (i,j) pair.
  std::vector<Eigen::MatrixXd> rows_of_pair(m * m);
  {
    std::vector<std::vector<double>> times(m * m);
    for (const auto& rec : obs.records)
      times[(rec.from - 1) * m + (rec.to - 1)].push_back(rec.t);
    for (int p = 0; p < m * m; ++p) {
      rows_of_pair[p].resize(static_cast<int>(times[p].size()), q);
      for (std::size_t r = 0; r < times[p].size(); ++r)
        rows_of_pair[p].row(static_cast<int>(r)) =
            eval_basis(basis, times[p][r]).transpose();
    }
  }

  ConvexProgram cp;
  cp.set_dimension(nvar);
  const double floor_p = opts.probability_floor;
  // Mean (per-observation) negative log-likelihood: same minimizer as the
  // sum, but the KKT tolerance stays meaningful at any sample size.
  const double inv_n = 1.0 / static_cast<double>(obs.records.size());
  cp.objective = [m, q, floor_p, inv_n, &rows_of_pair](
                     const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double value = 0.0;
    if (grad) grad->setZero(x.size());
    for (int p = 0; p < m * m; ++p) {
      const auto& B = rows_of_pair[p];
      if (B.rows() == 0) continue;
      Eigen::VectorXd probs = B * x.segment(p * q, q);
      for (int r = 0; r < probs.size(); ++r) {
        double pr = probs[r];
        if (pr >= floor_p) {
          value -= std::log(pr);
          if (grad) grad->segment(p * q, q) -= B.row(r).transpose() / pr;
        } else {
          // linear extension below the floor keeps the oracle C^1 and convex
          value -= std::log(floor_p) + (pr - floor_p) / floor_p;
          if (grad) grad->segment(p * q, q) -= B.row(r).transpose() / floor_p;
        }
      }
    }
    if (grad) *grad *= inv_n;
    return value * inv_n;
  };

  // Equalities: row sums and stationarity, per basis component.
  cp.eq_lhs = Eigen::MatrixXd::Zero(2 * m * q, nvar);
  cp.eq_rhs = Eigen::VectorXd::Zero(2 * m * q);
  int row = 0;
  for (int i = 1; i <= m; ++i)
    for (int ell = 0; ell < q; ++ell) {
      for (int j = 1; j <= m; ++j)
        cp.eq_lhs(row, gamma_index(m, q, i, j, ell)) = 1.0;
      cp.eq_rhs(row) = ell == 0 ? 1.0 : 0.0;
      ++row;
    }
  for (int j = 1; j <= m; ++j)
    for (int ell = 0; ell < q; ++ell) {
      for (int i = 1; i <= m; ++i)
        cp.eq_lhs(row, gamma_index(m, q, i, j, ell)) = pi[i - 1];
      cp.eq_rhs(row) = ell == 0 ? pi[j - 1] : 0.0;
      ++row;
    }

  // Bound constraints 0 <= p_ij(t) <= 1 for all t.
  const bool exact_cone =
      !basis.constant_only && basis.periods.size() == 1 &&
      basis.harmonic_order == 1;
  if (basis.constant_only) {
    for (int p = 0; p < m * m; ++p) {
      cp.lower[p * q] = 0.0;
      cp.upper[p * q] = 1.0;
    }
  } else if (exact_cone) {
    // ||(g1, g2)|| <= g0  and  ||(g1, g2)|| <= 1 - g0.
    for (int p = 0; p < m * m; ++p) {
      ConvexProgram::Affine u, v, w0, w1;
      u.coeffs.resize(nvar);
      v.coeffs.resize(nvar);
      w0.coeffs.resize(nvar);
      w1.coeffs.resize(nvar);
      u.coeffs.insert(p * q + 1) = 1.0;
      v.coeffs.insert(p * q + 2) = 1.0;
      w0.coeffs.insert(p * q) = 1.0;
      w1.coeffs.insert(p * q) = -1.0;
      w1.offset = 1.0;
      cp.add_cone(u, v, w0);
      cp.add_cone(u, v, w1);
    }
  } else {
    const double period = basis.overall_period;
    for (int gidx = 0; gidx < opts.boundary_grid; ++gidx) {
      double t = period * gidx / opts.boundary_grid;
      Eigen::VectorXd b = eval_basis(basis, t);
      for (int p = 0; p < m * m; ++p) {
        Eigen::SparseVector<double> lo(nvar), hi(nvar);
        for (int ell = 0; ell < q; ++ell) {
          lo.insert(p * q + ell) = b[ell];
          hi.insert(p * q + ell) = -b[ell];
        }
        cp.add_affine_ge(lo, -opts.boundary_margin);
        cp.add_affine_ge(hi, 1.0 - opts.boundary_margin);
      }
    }
  }

  // Start: homogeneous estimate projected onto the equality subspace, blended
  // toward the fully interior matrix with rows equal to pi.
  Eigen::VectorXd center = Eigen::VectorXd::Zero(nvar);
  for (int i = 1; i <= m; ++i)
    for (int j = 1; j <= m; ++j)
      center[gamma_index(m, q, i, j, 0)] = pi[j - 1];

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
  for (const auto& rec : obs.records)
    counts(rec.from - 1, rec.to - 1) += 1.0;
  Eigen::MatrixXd homog = estimate_homogeneous(counts).matrix;
  Eigen::VectorXd x_h = Eigen::VectorXd::Zero(nvar);
  for (int i = 1; i <= m; ++i)
    for (int j = 1; j <= m; ++j)
      x_h[gamma_index(m, q, i, j, 0)] = homog(i - 1, j - 1);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(cp.eq_lhs);
  Eigen::VectorXd x_p = x_h - cod.solve(cp.eq_lhs * x_h - cp.eq_rhs);

  auto strictly_interior = [&](const Eigen::VectorXd& x) {
    for (int p = 0; p < m * m; ++p) {
      Eigen::VectorXd g = x.segment(p * q, q);
      double g0 = g[0];
      if (basis.constant_only) {
        if (g0 <= 1e-6 || g0 >= 1.0 - 1e-6) return false;
      } else if (exact_cone) {
        double norm12 = std::hypot(g[1], g[2]);
        if (norm12 >= std::min(g0, 1.0 - g0) - 1e-6) return false;
      } else {
        // conservative check on the grid
        const double period = basis.overall_period;
        for (int gi = 0; gi < opts.boundary_grid; ++gi) {
          double val =
              g.dot(eval_basis(basis, period * gi / opts.boundary_grid));
          if (val <= 2 * opts.boundary_margin ||
              val >= 1.0 - 2 * opts.boundary_margin)
            return false;
        }
      }
    }
    return true;
  };

  Eigen::VectorXd start = center;
  for (double alpha : {1.0, 0.9, 0.75, 0.5, 0.25, 0.1}) {
    Eigen::VectorXd cand = alpha * x_p + (1.0 - alpha) * center;
    if (strictly_interior(cand)) {
      start = cand;
      break;
    }
  }

  SolveResult sol = solve_convex(cp, start, opts.kkt_tol);
  if (sol.status != SolveStatus::Optimal)
    fail(strf("fit_periodic_transitions: solve failed (%s) %s",
              to_string(sol.status), sol.message.c_str()));

  PeriodicTransitionModel model;
  model.num_states = m;
  model.basis = basis;
  model.pi = pi;
  model.gamma.resize(m * m);
  for (int p = 0; p < m * m; ++p) model.gamma[p] = sol.x.segment(p * q, q);
  return model;
}

Eigen::MatrixXd eval_transition(const PeriodicTransitionModel& model,
                                double t) {
  const int m = model.num_states;
  Eigen::VectorXd b = eval_basis(model.basis, t);
  Eigen::MatrixXd P(m, m);
  for (int i = 1; i <= m; ++i)
    for (int j = 1; j <= m; ++j) {
      double p = model.coeffs(i, j).dot(b);
      if (p < 0.0 && p >= -1e-8) p = 0.0;
      if (p > 1.0 && p <= 1.0 + 1e-8) p = 1.0;
      P(i - 1, j - 1) = p;
    }
  return P;
}

double neg_log_likelihood(const PeriodicTransitionModel& model,
                          const TransitionObservations& obs) {
  double nll = 0.0;
  for (std::size_t k = 0; k < obs.records.size(); ++k) {
    const auto& rec = obs.records[k];
    double p =
        model.coeffs(rec.from, rec.to).dot(eval_basis(model.basis, rec.t));
    if (p <= 0.0)
      fail(strf("neg_log_likelihood: observation %zu (t=%g, %d->%d) has "
                "probability %g",
                k, rec.t, rec.from, rec.to, p));
    nll -= std::log(p);
  }
  return nll;
}

void validate_transition_model(const PeriodicTransitionModel& model,
                               int grid_points) {
  const int m = model.num_states;
  const double period = model.basis.overall_period;
  for (int g = 0; g < grid_points; ++g) {
    double t = period * g / grid_points;
    Eigen::VectorXd b = eval_basis(model.basis, t);
    Eigen::MatrixXd P(m, m);
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j)
        P(i - 1, j - 1) = model.coeffs(i, j).dot(b);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j)
        require(P(i, j) >= -1e-8 && P(i, j) <= 1.0 + 1e-8,
                strf("transition model: p[%d][%d](%g) = %.12g out of range",
                     i + 1, j + 1, t, P(i, j)));
      require(std::abs(P.row(i).sum() - 1.0) <= 1e-8,
              strf("transition model: row %d sums to %.12g at t=%g", i + 1,
                   P.row(i).sum(), t));
    }
    Eigen::VectorXd piP = P.transpose() * model.pi;
    for (int j = 0; j < m; ++j)
      require(std::abs(piP[j] - model.pi[j]) <= 1e-6,
              strf("transition model: stationarity violated at t=%g (state "
                   "%d, %.3e)",
                   t, j + 1, std::abs(piP[j] - model.pi[j])));
  }
}

}  // namespace cyclomdp
