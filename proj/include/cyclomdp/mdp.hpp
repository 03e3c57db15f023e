#pragma once

#include <span>
#include <string>
#include <vector>

#include "cyclomdp/lp.hpp"

namespace cyclomdp {

// Periodic average-cost MDP: states i, actions k, cyclic time t in
// [0, period). Kernels are stored sparse per (t, i, k).
struct MdpSpec {
  int num_states = 0;
  int num_actions = 0;
  int period = 0;

  struct Transition {
    int to = 0;
    double prob = 0.0;
  };

  void resize(int states, int actions, int period_steps);
  void set_action(int t, int i, int k, double cost,
                  std::vector<Transition> row);
  void disallow(int t, int i, int k);

  bool allowed(int t, int i, int k) const { return allowed_[flat(t, i, k)]; }
  double cost(int t, int i, int k) const { return cost_[flat(t, i, k)]; }
  const std::vector<Transition>& kernel(int t, int i, int k) const {
    return kernel_[flat(t, i, k)];
  }

  // Checks kernel rows (nonnegative, sum 1 +- 1e-10) and that every (i, t)
  // has at least one allowed action; throws naming the offending (i, k, t).
  void validate() const;

  int flat(int t, int i, int k) const {
    return (t * num_states + i) * num_actions + k;
  }

 private:
  std::vector<char> allowed_;
  std::vector<double> cost_;
  std::vector<std::vector<Transition>> kernel_;
};

// Randomized decision rule d[t][i][k].
struct Policy {
  int num_states = 0, num_actions = 0, period = 0;
  std::vector<double> d;

  double at(int t, int i, int k) const {
    return d[(t * num_states + i) * num_actions + k];
  }
  double& at(int t, int i, int k) {
    return d[(t * num_states + i) * num_actions + k];
  }
};

// Cyclostationary state-action probabilities y[t][i][k].
struct OccupancyMeasure {
  int num_states = 0, num_actions = 0, period = 0;
  std::vector<double> y;

  double at(int t, int i, int k) const {
    return y[(t * num_states + i) * num_actions + k];
  }
  double& at(int t, int i, int k) {
    return y[(t * num_states + i) * num_actions + k];
  }
};

struct MdpLp {
  LinearProgram lp;
  // LP variable index of each allowed (t, i, k) flat index; -1 if disallowed.
  std::vector<int> var_of;
};

// The occupancy LP: minimize sum c.y subject to per-t normalization and
// cyclic flow balance (t + 1 taken modulo period), y >= 0.
MdpLp build_mdp_lp(const MdpSpec& spec);

struct MdpSolution {
  Policy policy;
  OccupancyMeasure occupancy;
  double cycle_cost = 0.0;  // expected cost per cycle
  int lp_iterations = 0;
  std::string note;
};

MdpSolution solve_mdp(const MdpSpec& spec, const SolverOptions& opts = {});

// d = y / sum_k y where the state is visited; unvisited (i, t) pairs get the
// cheapest allowed action deterministically.
Policy extract_policy(const OccupancyMeasure& y, const MdpSpec& spec);

// Exact long-run cost per cycle of a fixed policy (linear solve for the
// cyclostationary distribution).
double policy_cycle_cost(const MdpSpec& spec, const Policy& policy);

// Best policy constrained to be identical across all t in a class. When the
// quotient is compatible with the kernel/cost structure this is an exact LP
// over the time-collapsed MDP; otherwise it falls back to a deterministic
// iterated best-response heuristic (see `note` in the result).
MdpSolution restrict_policy_sharing(const MdpSpec& spec,
                                    std::span<const int> class_of_t,
                                    const SolverOptions& opts = {});

}  // namespace cyclomdp
