#pragma once

#include <cstdint>
#include <vector>

#include "cyclomdp/discretize.hpp"
#include "cyclomdp/mdp.hpp"
#include "cyclomdp/rng.hpp"

namespace cyclomdp {

struct SamplePath {
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<int> states;    // driver chain states, 1-based
  std::vector<double> values; // realized block values
  // filled by rollout_policy
  std::vector<int> system_states;
  std::vector<int> actions;
  std::vector<double> costs;
  std::vector<double> unmet;
};

struct CostReport {
  double total_cost = 0.0;
  double total_unmet = 0.0;  // "Extra": demand still unmet, energy units
  std::vector<double> cost_per_cycle;
  std::vector<double> unmet_per_cycle;
};

// Cyclostationary sample path of the fitted chain: initial state from pi,
// transitions from P(t), values from the destination block distributions.
// Draws are split by (purpose, t) so the path is reproducible and stable
// under added instrumentation.
SamplePath simulate_chain(const PeriodicTransitionModel& model,
                          const InflowKernel& kernel, std::int64_t horizon,
                          std::uint64_t seed);

// Physical system driven by an exogenous chain path. MDP states are
// (driver state, internal state) pairs; the implementation owns the
// encoding.
class SystemModel {
 public:
  virtual ~SystemModel() = default;
  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;
  virtual int period() const = 0;
  virtual int num_internal() const = 0;
  virtual int encode(int driver_state, int internal) const = 0;
  virtual int internal_of(int mdp_state) const = 0;

  struct Step {
    int next_internal = 0;
    double cost = 0.0;
    double unmet = 0.0;
  };
  // Advance one step from `internal` given the realized driver state/value
  // at time t and the chosen action.
  virtual Step step(int internal, int driver_state, double driver_value,
                    int action, std::int64_t t) const = 0;
};

struct RolloutOptions {
  bool deterministic_actions = false;  // argmax instead of sampling
  int initial_internal = -1;           // -1: draw from `occupancy` at t = 0
  const OccupancyMeasure* occupancy = nullptr;
};

struct RolloutResult {
  SamplePath path;
  CostReport report;
};

// Rolls a policy out along a driver path; actions are sampled from the
// policy rows (or taken modal). Action draws are keyed by t only, so two
// plans compared under the same seed share their random numbers.
RolloutResult rollout_policy(const SystemModel& system, const Policy& policy,
                             const SamplePath& driver, std::uint64_t seed,
                             const RolloutOptions& opts = {});

// Per-t marginal state distribution sum_k y[t][i][k].
std::vector<std::vector<double>> occupancy_summary(const OccupancyMeasure& y);

}  // namespace cyclomdp
