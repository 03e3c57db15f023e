// Brute-force reference for small periodic MDPs: enumerate every
// deterministic cyclic policy, compute its exact long-run cycle cost from
// the stationary distribution of the cycle map, and return the best.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cyclomdp/mdp.hpp"

namespace testsupport {

inline double brute_force_cycle_cost(const cyclomdp::MdpSpec& spec) {
  const int S = spec.num_states, A = spec.num_actions, T = spec.period;
  std::vector<std::vector<int>> choices(static_cast<std::size_t>(S) * T);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < A; ++k)
        if (spec.allowed(t, i, k)) choices[t * S + i].push_back(k);

  std::vector<std::size_t> cursor(choices.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    // evaluate the current deterministic policy
    std::vector<Eigen::MatrixXd> Q(T, Eigen::MatrixXd::Zero(S, S));
    std::vector<Eigen::VectorXd> cost(T, Eigen::VectorXd::Zero(S));
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < S; ++i) {
        int k = choices[t * S + i][cursor[t * S + i]];
        cost[t][i] = spec.cost(t, i, k);
        for (const auto& tr : spec.kernel(t, i, k))
          Q[t](i, tr.to) += tr.prob;
      }
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(S, S);
    for (int t = 0; t < T; ++t) C *= Q[t];
    // stationary distribution of the (strictly positive) cycle map by power
    // iteration
    Eigen::VectorXd x = Eigen::VectorXd::Constant(S, 1.0 / S);
    for (int it = 0; it < 20000; ++it) {
      Eigen::VectorXd nxt = C.transpose() * x;
      nxt /= nxt.sum();
      if ((nxt - x).lpNorm<Eigen::Infinity>() < 1e-15) {
        x = nxt;
        break;
      }
      x = nxt;
    }
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
      total += x.dot(cost[t]);
      x = Q[t].transpose() * x;
    }
    best = std::min(best, total);

    // advance the choice cursor
    std::size_t pos = 0;
    while (pos < cursor.size()) {
      if (++cursor[pos] < choices[pos].size()) break;
      cursor[pos] = 0;
      ++pos;
    }
    if (pos == cursor.size()) break;
  }
  return best;
}

}  // namespace testsupport
