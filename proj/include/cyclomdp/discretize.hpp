#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cyclomdp/chain.hpp"
#include "cyclomdp/quantile.hpp"

namespace cyclomdp {

// Block-quantized value distribution of one chain state at one time.
struct BlockDistribution {
  double time = 0.0;
  int state = 0;
  double block = 0.0;
  std::vector<double> support;  // multiples of `block`, increasing
  std::vector<double> probs;    // nonnegative, sum to 1

  double mean() const;
};

// Normalized coordinate of x within the state interval at time t: interior
// states map the interval to [0, 1); extreme states divide by the finite
// endpoint. Throws on a degenerate interval (width below 1e-9).
double normalize_inflow(const QuantileFamily& family, int state, double t,
                        double x);

struct BlockOptions {
  // Support truncation for the extreme states' semi-infinite intervals.
  double floor = 0.0;        // lowest admissible value (0: inflows)
  double cap = kInfinity;    // highest admissible value (e.g. an empirical
                             // high percentile); must be finite to build the
                             // highest state
};

// Support = multiples of `block` inside the state interval; probabilities
// match the empirical normalized distribution by nearest-point (Voronoi)
// cells in normalized coordinates, ties split equally.
BlockDistribution build_block_distribution(
    const QuantileFamily& family, int state, double t, double block,
    std::span<const double> normalized_sample, const BlockOptions& opts = {});

// Pools the normalized values of every observation by its assigned state
// (time enters only through the normalization).
std::vector<std::vector<double>> normalized_samples_by_state(
    const QuantileFamily& family, std::span<const Observation> data);

// Joint kernel over (chain state, block value): state transition times the
// destination state's block distribution at the destination time.
struct InflowKernel {
  int num_states = 0;
  int period = 0;  // integer time steps per cycle
  double block = 0.0;
  // dist[t][i-1] = block distribution of state i at integer time t
  std::vector<std::vector<BlockDistribution>> dist;
  // transition[t] = P(t) at integer time t
  std::vector<Eigen::MatrixXd> transition;

  struct JointEntry {
    int to = 0;       // destination state, 1-based
    double value = 0; // block value realized on arrival
    double prob = 0;
  };
  // Composed row from state i at time t (destination dist at t+1 mod period).
  std::vector<JointEntry> composed_row(int t, int state) const;
};

// `step_times` maps kernel step -> model time (empty: identity), so a
// coarse cyclic grid (e.g. representative days) can subsample a long period.
InflowKernel compose_inflow_kernel(
    const PeriodicTransitionModel& model, const QuantileFamily& family,
    double block, const std::vector<std::vector<double>>& samples_by_state,
    int period_steps, const BlockOptions& opts = {},
    std::span<const double> step_times = {});

}  // namespace cyclomdp
