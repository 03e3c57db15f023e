#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cyclomdp/basis.hpp"
#include "cyclomdp/lp.hpp"

namespace cyclomdp {

struct Observation {
  double t = 0.0;
  double x = 0.0;
};

// One fitted quantile curve q_p(t) = beta . basis(t).
struct QuantileCurve {
  double level = 0.5;  // p in (0,1)
  BasisSpec basis;
  Eigen::VectorXd beta;
};

double eval_quantile(const QuantileCurve& curve, double t);

// Pinball (check) loss max(p*x, (p-1)*x).
double pinball_loss(double level, double residual);
double total_pinball_loss(const QuantileCurve& curve,
                          std::span<const Observation> data);

struct QuantileFit {
  QuantileCurve curve;
  double objective = 0.0;  // total pinball loss at the fitted coefficients
  int lp_iterations = 0;
};

// Minimizes total pinball loss over the coefficient space via the LP with
// split positive/negative residual variables. Requires at least
// basis.dimension() observations and a full-rank design; a rank-deficient
// design is rejected with the collinear components named.
QuantileFit fit_quantile(std::span<const Observation> data, double level,
                         const BasisSpec& basis,
                         const SolverOptions& opts = {});

// 1 - (pinball loss of the fit) / (pinball loss around the unconditional
// sample quantile). Zero when all data are equal, by convention.
double pseudo_r2(const QuantileCurve& curve, std::span<const Observation> data);

// Ordered family of quantile curves sharing one basis. Levels are strictly
// increasing within (0, 1); levels 0 and 1 act as -inf/+inf sentinels for
// the extreme state intervals.
struct QuantileFamily {
  std::vector<QuantileCurve> curves;

  int num_states() const { return static_cast<int>(curves.size()) + 1; }
  const BasisSpec& basis() const { return curves.front().basis; }
  std::vector<double> levels() const;
};

// Validates ordering and the shared basis.
QuantileFamily make_family(std::vector<QuantileCurve> curves);

// Uniform grid of n points over the basis's overall period.
std::vector<double> phase_grid(const BasisSpec& basis, int n);

// Pointwise isotonic rearrangement of the curve evaluations on `grid`,
// refit by least squares, with constant shifts as a final guarantee; returns
// the input unchanged when it is already non-crossing on the grid.
QuantileFamily repair_crossings(const QuantileFamily& family,
                                std::span<const double> grid);

// [lower, upper) interval of `state` (1-based) at time t; +-infinity for the
// extreme states.
std::pair<double, double> state_interval(const QuantileFamily& family,
                                         int state, double t);

}  // namespace cyclomdp
