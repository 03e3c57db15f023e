#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cyclomdp/basis.hpp"
#include "cyclomdp/quantile.hpp"

namespace cyclomdp {

// One observed transition: from state `from` at time t to state `to` at the
// next step. States are 1-based.
struct TransitionObservation {
  double t = 0.0;
  int from = 0;
  int to = 0;
};

struct TransitionObservations {
  int num_states = 0;
  std::vector<TransitionObservation> records;
};

// Time-inhomogeneous transition model p_ij(t) = gamma_ij . basis(t) with a
// known stationary distribution pi.
struct PeriodicTransitionModel {
  int num_states = 0;
  BasisSpec basis;
  // coefficient vectors indexed by (i-1)*num_states + (j-1), 1-based states
  std::vector<Eigen::VectorXd> gamma;
  Eigen::VectorXd pi;

  const Eigen::VectorXd& coeffs(int i, int j) const {
    return gamma[(i - 1) * num_states + (j - 1)];
  }
  Eigen::VectorXd& coeffs(int i, int j) {
    return gamma[(i - 1) * num_states + (j - 1)];
  }
};

// State of x at time t under the half-open convention
// q_{p_{i-1}}(t) <= x < q_{p_i}(t); extreme intervals make it total in x.
int assign_state(const QuantileFamily& family, double t, double x);

// Counts transitions between consecutive observations; pairs whose time gap
// differs from `step` are skipped (missing data).
Eigen::MatrixXd count_transitions(std::span<const double> times,
                                  std::span<const int> states, int num_states,
                                  double step = 1.0);

// Assigns each observation to a state and pairs consecutive observations.
TransitionObservations observe_series(const QuantileFamily& family,
                                      std::span<const Observation> data,
                                      double step = 1.0);

struct HomogeneousEstimate {
  Eigen::MatrixXd matrix;
  std::vector<int> never_observed;  // source states with all-zero count rows
};
// p_ij = n_ij / sum_k n_ik; all-zero rows become uniform and are reported.
HomogeneousEstimate estimate_homogeneous(const Eigen::MatrixXd& counts);

// Alternating row/column normalization to a doubly stochastic matrix.
// Throws if the matrix has a zero row or column or if `tol` is not reached
// within `max_iter` iterations (the error carries the last residual).
Eigen::MatrixXd sinkhorn_balance(const Eigen::MatrixXd& matrix,
                                 double tol = 1e-10, int max_iter = 1000);

// pi_i = p_i - p_{i-1} from quantile levels (with p_0 = 0, p_m = 1).
Eigen::VectorXd stationary_from_levels(std::span<const double> levels);

struct TransitionFitOptions {
  // Bound enforcement grid for bases without an exact cone reduction.
  int boundary_grid = 720;
  double boundary_margin = 1e-4;
  double kkt_tol = 1e-6;
  double probability_floor = 1e-9;
};

// Constrained maximum-likelihood fit of the gamma coefficients: row sums,
// stationarity under pi, and 0 <= p_ij(t) <= 1 for all t (exact second-order
// cone reduction for a single-period order-1 basis, dense grid otherwise).
PeriodicTransitionModel fit_periodic_transitions(
    const TransitionObservations& obs, const Eigen::VectorXd& pi,
    const BasisSpec& basis, const TransitionFitOptions& opts = {});

// P(t); rows sum to 1, entries clamped to [0,1] only within 1e-8.
Eigen::MatrixXd eval_transition(const PeriodicTransitionModel& model,
                                double t);

double neg_log_likelihood(const PeriodicTransitionModel& model,
                          const TransitionObservations& obs);

// Grid check of the model invariants (entries, row sums, stationarity);
// throws with the worst violation on failure.
void validate_transition_model(const PeriodicTransitionModel& model,
                               int grid_points = 1000);

}  // namespace cyclomdp
