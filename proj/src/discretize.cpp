#include "cyclomdp/discretize.hpp"

#include <algorithm>
#include <cmath>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

double BlockDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) m += support[i] * probs[i];
  return m;
}

double normalize_inflow(const QuantileFamily& family, int state, double t,
                        double x) {
  const int m = family.num_states();
  if (m == 1) return x;  // no finite endpoints; raw coordinates
  auto [lo, hi] = state_interval(family, state, t);
  if (state > 1 && state < m) {
    double width = hi - lo;
    require(width >= 1e-9,
            strf("normalize_inflow: degenerate interval of state %d at t=%g "
                 "(width %.3e)",
                 state, t, width));
    return (x - lo) / width;
  }
  // Extreme states: simple division by the finite endpoint.
  double endpoint = state == 1 ? hi : lo;
  require(std::abs(endpoint) >= 1e-9,
          strf("normalize_inflow: endpoint of extreme state %d at t=%g is "
               "%.3e, too close to zero",
               state, t, endpoint));
  return x / endpoint;
}

BlockDistribution build_block_distribution(
    const QuantileFamily& family, int state, double t, double block,
    std::span<const double> normalized_sample, const BlockOptions& opts) {
  require(block > 0, "build_block_distribution: block must be positive");
  require(!normalized_sample.empty(),
          "build_block_distribution: empty empirical sample");
  const int m = family.num_states();
  auto [lo, hi] = state_interval(family, state, t);
  if (state == 1) lo = opts.floor;
  if (state == m) {
    require(std::isfinite(opts.cap),
            "build_block_distribution: the highest state needs a finite cap");
    hi = std::max(opts.cap, lo);
  }

  BlockDistribution bd;
  bd.time = t;
  bd.state = state;
  bd.block = block;

  // Multiples of the block size in the closed interval [lo, hi].
  long k0 = static_cast<long>(std::ceil(lo / block - 1e-9));
  long k1 = static_cast<long>(std::floor(hi / block + 1e-9));
  for (long k = k0; k <= k1; ++k) {
    double v = k * block;
    if (v < lo - 1e-9 * block || v > hi + 1e-9 * block) continue;
    bd.support.push_back(v);
  }
  require(!bd.support.empty(),
          strf("build_block_distribution: no block multiple inside state %d "
               "interval [%g, %g) at t=%g; use a smaller block size",
               state, lo, hi, t));

  require(std::is_sorted(normalized_sample.begin(), normalized_sample.end()),
          "build_block_distribution: normalized sample must be sorted");

  bd.probs.assign(bd.support.size(), 0.0);
  const std::size_t K = bd.support.size();
  if (K == 1) {
    bd.probs[0] = 1.0;
    return bd;
  }

  // Nearest-point cells in normalized coordinates; the empirical mass per
  // cell comes from binary searches on the sorted sample, boundary ties
  // split equally.
  std::vector<double> norm_support(K);
  for (std::size_t i = 0; i < K; ++i)
    norm_support[i] = normalize_inflow(family, state, t, bd.support[i]);
  const double n = static_cast<double>(normalized_sample.size());
  std::vector<double> below(K - 1), at(K - 1);
  for (std::size_t i = 0; i + 1 < K; ++i) {
    double cut = 0.5 * (norm_support[i] + norm_support[i + 1]);
    auto lo = std::lower_bound(normalized_sample.begin(),
                               normalized_sample.end(), cut);
    auto hi = std::upper_bound(lo, normalized_sample.end(), cut);
    below[i] = static_cast<double>(lo - normalized_sample.begin());
    at[i] = static_cast<double>(hi - lo);
  }
  bd.probs[0] = below[0] + 0.5 * at[0];
  for (std::size_t c = 1; c + 1 < K; ++c)
    bd.probs[c] = below[c] - below[c - 1] - 0.5 * at[c - 1] + 0.5 * at[c];
  bd.probs[K - 1] = n - below[K - 2] - 0.5 * at[K - 2];
  for (double& p : bd.probs) p /= n;
  return bd;
}

std::vector<std::vector<double>> normalized_samples_by_state(
    const QuantileFamily& family, std::span<const Observation> data) {
  std::vector<std::vector<double>> out(family.num_states());
  for (const auto& ob : data) {
    int state = assign_state(family, ob.t, ob.x);
    out[state - 1].push_back(normalize_inflow(family, state, ob.t, ob.x));
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<InflowKernel::JointEntry> InflowKernel::composed_row(
    int t, int state) const {
  const Eigen::MatrixXd& P = transition[t];
  const int tn = (t + 1) % period;
  std::vector<JointEntry> row;
  for (int j = 1; j <= num_states; ++j) {
    double pj = P(state - 1, j - 1);
    if (pj <= 0.0) continue;
    const BlockDistribution& bd = dist[tn][j - 1];
    for (std::size_t b = 0; b < bd.support.size(); ++b)
      if (bd.probs[b] > 0.0)
        row.push_back({j, bd.support[b], pj * bd.probs[b]});
  }
  return row;
}

InflowKernel compose_inflow_kernel(
    const PeriodicTransitionModel& model, const QuantileFamily& family,
    double block, const std::vector<std::vector<double>>& samples_by_state,
    int period_steps, const BlockOptions& opts,
    std::span<const double> step_times) {
  require(model.num_states == family.num_states(),
          "compose_inflow_kernel: model and family disagree on the number of "
          "states");
  require(static_cast<int>(samples_by_state.size()) == model.num_states,
          "compose_inflow_kernel: one sample vector per state required");
  require(period_steps >= 1, "compose_inflow_kernel: period_steps >= 1");
  require(step_times.empty() ||
              static_cast<int>(step_times.size()) == period_steps,
          "compose_inflow_kernel: step_times must match period_steps");

  InflowKernel kernel;
  kernel.num_states = model.num_states;
  kernel.period = period_steps;
  kernel.block = block;
  kernel.dist.resize(period_steps);
  kernel.transition.resize(period_steps);
  for (int t = 0; t < period_steps; ++t) {
    double model_time = step_times.empty() ? t : step_times[t];
    kernel.transition[t] = eval_transition(model, model_time);
    kernel.dist[t].reserve(model.num_states);
    for (int i = 1; i <= model.num_states; ++i)
      kernel.dist[t].push_back(build_block_distribution(
          family, i, model_time, block, samples_by_state[i - 1], opts));
  }
  return kernel;
}

}  // namespace cyclomdp
