#include "cyclomdp/simulate.hpp"

#include <cmath>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

SamplePath simulate_chain(const PeriodicTransitionModel& model,
                          const InflowKernel& kernel, std::int64_t horizon,
                          std::uint64_t seed) {
  require(horizon >= 1, "simulate_chain: horizon must be >= 1");
  require(model.num_states == kernel.num_states,
          "simulate_chain: model/kernel state counts differ");
  const int T = kernel.period;

  SamplePath path;
  path.seed = seed;
  path.times.reserve(horizon);
  path.states.reserve(horizon);
  path.values.reserve(horizon);

  std::vector<double> pi(model.pi.data(), model.pi.data() + model.pi.size());
  int state = RngStream(seed, "chain-init").sample_cdf(pi) + 1;

  for (std::int64_t t = 0; t < horizon; ++t) {
    int phase = static_cast<int>(t % T);
    if (t > 0) {
      const Eigen::MatrixXd& P = kernel.transition[(t - 1) % T];
      Eigen::VectorXd row = P.row(state - 1);
      state = RngStream(seed, "chain-step", static_cast<std::uint64_t>(t))
                  .sample_cdf({row.data(), static_cast<std::size_t>(row.size())}) +
              1;
    }
    const BlockDistribution& bd = kernel.dist[phase][state - 1];
    int cell = RngStream(seed, "chain-value", static_cast<std::uint64_t>(t))
                   .sample_cdf(bd.probs);
    path.times.push_back(static_cast<double>(t));
    path.states.push_back(state);
    path.values.push_back(bd.support[cell]);
  }
  return path;
}

RolloutResult rollout_policy(const SystemModel& system, const Policy& policy,
                             const SamplePath& driver, std::uint64_t seed,
                             const RolloutOptions& opts) {
  require(policy.num_states == system.num_states() &&
              policy.num_actions == system.num_actions() &&
              policy.period == system.period(),
          "rollout_policy: policy dimensions do not match the system");
  const int T = policy.period;
  const std::int64_t horizon = static_cast<std::int64_t>(driver.states.size());
  require(horizon >= 1, "rollout_policy: empty driver path");

  int internal = opts.initial_internal;
  if (internal < 0) {
    require(opts.occupancy != nullptr,
            "rollout_policy: provide initial_internal or an occupancy");
    // Draw the internal state from the occupancy at t = 0 conditional on the
    // driver's initial state.
    std::vector<double> weights(system.num_internal(), 0.0);
    for (int n = 0; n < system.num_internal(); ++n) {
      int s = system.encode(driver.states[0], n);
      for (int k = 0; k < policy.num_actions; ++k)
        weights[n] += opts.occupancy->at(0, s, k);
    }
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) weights.assign(weights.size(), 1.0);
    internal = RngStream(seed, "rollout-init").sample_cdf(weights);
  }

  RolloutResult out;
  out.path.seed = seed;
  out.path.times = driver.times;
  out.path.states = driver.states;
  out.path.values = driver.values;

  double cycle_cost = 0.0, cycle_unmet = 0.0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    int phase = static_cast<int>(t % T);
    int mdp_state = system.encode(driver.states[t], internal);
    int action;
    if (opts.deterministic_actions) {
      action = 0;
      for (int k = 1; k < policy.num_actions; ++k)
        if (policy.at(phase, mdp_state, k) >
            policy.at(phase, mdp_state, action))
          action = k;
    } else {
      std::vector<double> row(policy.num_actions);
      double total = 0.0;
      for (int k = 0; k < policy.num_actions; ++k) {
        row[k] = policy.at(phase, mdp_state, k);
        require(row[k] >= -1e-12, "rollout_policy: negative policy entry");
        total += row[k];
      }
      require(std::abs(total - 1.0) <= 1e-6,
              strf("rollout_policy: policy row (t=%d, state=%d) sums to %g",
                   phase, mdp_state, total));
      action = RngStream(seed, "rollout-action",
                         static_cast<std::uint64_t>(t))
                   .sample_cdf(row);
    }

    SystemModel::Step step = system.step(internal, driver.states[t],
                                         driver.values[t], action, t);
    out.path.system_states.push_back(mdp_state);
    out.path.actions.push_back(action);
    out.path.costs.push_back(step.cost);
    out.path.unmet.push_back(step.unmet);
    out.report.total_cost += step.cost;
    out.report.total_unmet += step.unmet;
    cycle_cost += step.cost;
    cycle_unmet += step.unmet;
    if (phase == T - 1 || t == horizon - 1) {
      out.report.cost_per_cycle.push_back(cycle_cost);
      out.report.unmet_per_cycle.push_back(cycle_unmet);
      cycle_cost = cycle_unmet = 0.0;
    }
    internal = step.next_internal;
  }
  return out;
}

std::vector<std::vector<double>> occupancy_summary(const OccupancyMeasure& y) {
  std::vector<std::vector<double>> out(
      y.period, std::vector<double>(y.num_states, 0.0));
  for (int t = 0; t < y.period; ++t)
    for (int i = 0; i < y.num_states; ++i)
      for (int k = 0; k < y.num_actions; ++k) out[t][i] += y.at(t, i, k);
  return out;
}

}  // namespace cyclomdp
