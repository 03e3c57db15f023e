#include "cyclomdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

void MdpSpec::resize(int states, int actions, int period_steps) {
  require(states > 0 && actions > 0 && period_steps > 0,
          "MdpSpec: dimensions must be positive");
  num_states = states;
  num_actions = actions;
  period = period_steps;
  std::size_t total = static_cast<std::size_t>(states) * actions * period_steps;
  allowed_.assign(total, 0);
  cost_.assign(total, 0.0);
  kernel_.assign(total, {});
}

void MdpSpec::set_action(int t, int i, int k, double cost,
                         std::vector<Transition> row) {
  int f = flat(t, i, k);
  allowed_[f] = 1;
  cost_[f] = cost;
  kernel_[f] = std::move(row);
}

void MdpSpec::disallow(int t, int i, int k) {
  int f = flat(t, i, k);
  allowed_[f] = 0;
  kernel_[f].clear();
}

void MdpSpec::validate() const {
  require(num_states > 0, "MdpSpec: empty");
  for (int t = 0; t < period; ++t)
    for (int i = 0; i < num_states; ++i) {
      bool any = false;
      for (int k = 0; k < num_actions; ++k) {
        if (!allowed(t, i, k)) continue;
        any = true;
        require(std::isfinite(cost(t, i, k)),
                strf("MdpSpec: cost(i=%d,k=%d,t=%d) not finite", i, k, t));
        const auto& row = kernel(t, i, k);
        require(!row.empty(),
                strf("MdpSpec: empty kernel row (i=%d,k=%d,t=%d)", i, k, t));
        double total = 0.0;
        for (const auto& tr : row) {
          require(tr.to >= 0 && tr.to < num_states && tr.prob >= 0,
                  strf("MdpSpec: bad transition (i=%d,k=%d,t=%d)->%d", i, k, t,
                       tr.to));
          total += tr.prob;
        }
        require(std::abs(total - 1.0) <= 1e-10,
                strf("MdpSpec: kernel row (i=%d,k=%d,t=%d) sums to %.12g", i,
                     k, t, total));
      }
      require(any, strf("MdpSpec: state %d has no allowed action at t=%d", i,
                        t));
    }
}

MdpLp build_mdp_lp(const MdpSpec& spec) {
  spec.validate();
  const int S = spec.num_states, A = spec.num_actions, T = spec.period;

  MdpLp out;
  out.var_of.assign(static_cast<std::size_t>(S) * A * T, -1);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < A; ++k)
        if (spec.allowed(t, i, k))
          out.var_of[spec.flat(t, i, k)] =
              out.lp.add_variable(spec.cost(t, i, k));

  // Row layout: T normalization rows, then T*S flow-balance rows indexed by
  // (source time t, destination state j), with t+1 wrapped modulo T.
  std::vector<std::vector<int>> row_idx(T + static_cast<std::size_t>(T) * S);
  std::vector<std::vector<double>> row_val(row_idx.size());
  auto balance_row = [&](int t, int j) { return T + t * S + j; };

  for (int t = 0; t < T; ++t)
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < A; ++k) {
        int var = out.var_of[spec.flat(t, i, k)];
        if (var < 0) continue;
        row_idx[t].push_back(var);
        row_val[t].push_back(1.0);
        // appears as inflow mass in the balance row of (t-1 -> t, j = i)
        int prev = (t + T - 1) % T;
        row_idx[balance_row(prev, i)].push_back(var);
        row_val[balance_row(prev, i)].push_back(1.0);
        for (const auto& tr : spec.kernel(t, i, k)) {
          if (tr.prob == 0.0) continue;
          row_idx[balance_row(t, tr.to)].push_back(var);
          row_val[balance_row(t, tr.to)].push_back(-tr.prob);
        }
      }

  for (int t = 0; t < T; ++t)
    out.lp.add_row(RowSense::Equal, 1.0, row_idx[t], row_val[t]);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < S; ++j)
      out.lp.add_row(RowSense::Equal, 0.0, row_idx[balance_row(t, j)],
                     row_val[balance_row(t, j)]);
  return out;
}

Policy extract_policy(const OccupancyMeasure& y, const MdpSpec& spec) {
  Policy pol;
  pol.num_states = spec.num_states;
  pol.num_actions = spec.num_actions;
  pol.period = spec.period;
  pol.d.assign(y.y.size(), 0.0);
  for (int t = 0; t < spec.period; ++t)
    for (int i = 0; i < spec.num_states; ++i) {
      double total = 0.0;
      for (int k = 0; k < spec.num_actions; ++k)
        if (spec.allowed(t, i, k)) total += std::max(0.0, y.at(t, i, k));
      if (total > 1e-12) {
        for (int k = 0; k < spec.num_actions; ++k)
          if (spec.allowed(t, i, k))
            pol.at(t, i, k) = std::max(0.0, y.at(t, i, k)) / total;
      } else {
        int best = -1;
        for (int k = 0; k < spec.num_actions; ++k)
          if (spec.allowed(t, i, k) &&
              (best < 0 || spec.cost(t, i, k) < spec.cost(t, i, best)))
            best = k;
        pol.at(t, i, best) = 1.0;
      }
    }
  return pol;
}

MdpSolution solve_mdp(const MdpSpec& spec, const SolverOptions& opts) {
  MdpLp built = build_mdp_lp(spec);
  SolveResult sol = solve_lp(built.lp, opts);
  if (sol.status != SolveStatus::Optimal)
    fail(strf("solve_mdp: LP returned %s (%s); a valid spec should always be "
              "feasible, this indicates a kernel bug",
              to_string(sol.status), sol.message.c_str()));

  MdpSolution out;
  out.occupancy.num_states = spec.num_states;
  out.occupancy.num_actions = spec.num_actions;
  out.occupancy.period = spec.period;
  out.occupancy.y.assign(built.var_of.size(), 0.0);
  for (std::size_t f = 0; f < built.var_of.size(); ++f)
    if (built.var_of[f] >= 0)
      out.occupancy.y[f] = std::max(0.0, sol.x[built.var_of[f]]);
  out.policy = extract_policy(out.occupancy, spec);
  out.cycle_cost = sol.objective;
  out.lp_iterations = sol.iterations;
  return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// Induced chain of a fixed policy: Q[t](i,j) and per-step expected costs.
struct InducedChain {
  std::vector<MatrixXd> Q;
  std::vector<VectorXd> cost;
};

InducedChain induce(const MdpSpec& spec, const Policy& pol) {
  InducedChain ch;
  ch.Q.assign(spec.period, MatrixXd::Zero(spec.num_states, spec.num_states));
  ch.cost.assign(spec.period, VectorXd::Zero(spec.num_states));
  for (int t = 0; t < spec.period; ++t)
    for (int i = 0; i < spec.num_states; ++i)
      for (int k = 0; k < spec.num_actions; ++k) {
        if (!spec.allowed(t, i, k)) continue;
        double w = pol.at(t, i, k);
        if (w == 0.0) continue;
        ch.cost[t][i] += w * spec.cost(t, i, k);
        for (const auto& tr : spec.kernel(t, i, k))
          ch.Q[t](i, tr.to) += w * tr.prob;
      }
  return ch;
}

// Cyclostationary distribution at t = 0 of the periodic chain (a stationary
// distribution of the cycle map). Deterministic: linear solve first, damped
// power iteration as fallback.
VectorXd cycle_stationary(const std::vector<MatrixXd>& Q) {
  const int S = static_cast<int>(Q[0].rows());
  MatrixXd C = MatrixXd::Identity(S, S);
  for (const auto& q : Q) C *= q;

  MatrixXd M = C.transpose() - MatrixXd::Identity(S, S);
  M.row(S - 1).setOnes();
  VectorXd rhs = VectorXd::Zero(S);
  rhs[S - 1] = 1.0;
  VectorXd x = M.fullPivLu().solve(rhs);
  if ((M * x - rhs).lpNorm<Eigen::Infinity>() <= 1e-8 && x.minCoeff() >= -1e-9) {
    x = x.cwiseMax(0.0);
    return x / x.sum();
  }
  VectorXd v = VectorXd::Constant(S, 1.0 / S);
  for (int pass = 0; pass < 20000; ++pass) {
    VectorXd nxt = 0.5 * v + 0.5 * (C.transpose() * v);
    nxt /= nxt.sum();
    if ((nxt - v).lpNorm<Eigen::Infinity>() < 1e-14) return nxt;
    v = nxt;
  }
  return v;
}

}  // namespace

double policy_cycle_cost(const MdpSpec& spec, const Policy& policy) {
  InducedChain ch = induce(spec, policy);
  VectorXd x = cycle_stationary(ch.Q);
  double total = 0.0;
  for (int t = 0; t < spec.period; ++t) {
    total += x.dot(ch.cost[t]);
    x = ch.Q[t].transpose() * x;
  }
  return total;
}

namespace {

// Shared-decision constraint machinery for restrict_policy_sharing.
struct Quotient {
  int num_classes = 0;
  std::vector<int> klass;        // compressed labels, size T
  std::vector<int> representative;  // first t of each class
  bool compatible = false;       // kernels/costs constant per class and the
                                 // successor map is well defined
  std::vector<int> successor;    // class -> class, when compatible
};

Quotient analyze_quotient(const MdpSpec& spec, std::span<const int> labels) {
  require(static_cast<int>(labels.size()) == spec.period,
          "restrict_policy_sharing: one class label per time step required");
  Quotient qt;
  std::map<int, int> remap;
  qt.klass.resize(spec.period);
  for (int t = 0; t < spec.period; ++t) {
    auto [it, inserted] = remap.try_emplace(labels[t], qt.num_classes);
    if (inserted) {
      ++qt.num_classes;
      qt.representative.push_back(t);
    }
    qt.klass[t] = it->second;
  }

  qt.successor.assign(qt.num_classes, -1);
  qt.compatible = true;
  for (int t = 0; t < spec.period && qt.compatible; ++t) {
    int c = qt.klass[t], cn = qt.klass[(t + 1) % spec.period];
    if (qt.successor[c] < 0)
      qt.successor[c] = cn;
    else if (qt.successor[c] != cn)
      qt.compatible = false;
  }
  if (!qt.compatible) return qt;

  // Kernels, costs, and masks must agree across each class.
  for (int t = 0; t < spec.period && qt.compatible; ++t) {
    int rep = qt.representative[qt.klass[t]];
    if (rep == t) continue;
    for (int i = 0; i < spec.num_states && qt.compatible; ++i)
      for (int k = 0; k < spec.num_actions && qt.compatible; ++k) {
        if (spec.allowed(t, i, k) != spec.allowed(rep, i, k)) {
          qt.compatible = false;
          break;
        }
        if (!spec.allowed(t, i, k)) continue;
        if (std::abs(spec.cost(t, i, k) - spec.cost(rep, i, k)) > 1e-12) {
          qt.compatible = false;
          break;
        }
        const auto& a = spec.kernel(t, i, k);
        const auto& b = spec.kernel(rep, i, k);
        if (a.size() != b.size()) {
          qt.compatible = false;
          break;
        }
        for (std::size_t r = 0; r < a.size(); ++r)
          if (a[r].to != b[r].to || std::abs(a[r].prob - b[r].prob) > 1e-12) {
            qt.compatible = false;
            break;
          }
      }
  }
  return qt;
}

}  // namespace

MdpSolution restrict_policy_sharing(const MdpSpec& spec,
                                    std::span<const int> class_of_t,
                                    const SolverOptions& opts) {
  const int S = spec.num_states, A = spec.num_actions, T = spec.period;
  Quotient qt = analyze_quotient(spec, class_of_t);

  if (qt.compatible) {
    // Exact: collapse time to the class cycle and solve the smaller LP.
    const int C = qt.num_classes;
    std::vector<int> order(C, -1), pos_of(C, -1);
    int c = qt.klass[0];
    for (int p = 0; p < C; ++p) {
      require(pos_of[c] < 0,
              "restrict_policy_sharing: class cycle shorter than class count");
      order[p] = c;
      pos_of[c] = p;
      c = qt.successor[c];
    }
    require(c == qt.klass[0],
            "restrict_policy_sharing: class successor map does not close");

    MdpSpec collapsed;
    collapsed.resize(S, A, C);
    for (int p = 0; p < C; ++p) {
      int rep = qt.representative[order[p]];
      for (int i = 0; i < S; ++i)
        for (int k = 0; k < A; ++k)
          if (spec.allowed(rep, i, k)) {
            std::vector<MdpSpec::Transition> row = spec.kernel(rep, i, k);
            collapsed.set_action(p, i, k, spec.cost(rep, i, k),
                                 std::move(row));
          }
    }
    MdpSolution small = solve_mdp(collapsed, opts);

    MdpSolution out;
    out.policy.num_states = S;
    out.policy.num_actions = A;
    out.policy.period = T;
    out.policy.d.assign(static_cast<std::size_t>(S) * A * T, 0.0);
    out.occupancy.num_states = S;
    out.occupancy.num_actions = A;
    out.occupancy.period = T;
    out.occupancy.y.assign(out.policy.d.size(), 0.0);
    for (int t = 0; t < T; ++t) {
      int p = pos_of[qt.klass[t]];
      for (int i = 0; i < S; ++i)
        for (int k = 0; k < A; ++k) {
          out.policy.at(t, i, k) = small.policy.at(p, i, k);
          out.occupancy.at(t, i, k) = small.occupancy.at(p, i, k);
        }
    }
    out.cycle_cost = small.cycle_cost * (static_cast<double>(T) / C);
    out.lp_iterations = small.lp_iterations;
    out.note = "exact (time-collapsed LP over compatible quotient)";
    return out;
  }

  // Incompatible quotient: deterministic iterated best response on shared
  // decision variables. Converges to a shared policy that is a local
  // optimum; the cost is evaluated exactly but global optimality is not
  // guaranteed.
  std::vector<char> shared_allowed(static_cast<std::size_t>(qt.num_classes) *
                                       S * A,
                                   1);
  auto sa = [&](int c, int i, int k) -> char& {
    return shared_allowed[(static_cast<std::size_t>(c) * S + i) * A + k];
  };
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < A; ++k)
        if (!spec.allowed(t, i, k)) sa(qt.klass[t], i, k) = 0;
  for (int c = 0; c < qt.num_classes; ++c)
    for (int i = 0; i < S; ++i) {
      bool any = false;
      for (int k = 0; k < A; ++k) any = any || sa(c, i, k);
      require(any, strf("restrict_policy_sharing: state %d has no action "
                        "allowed across class %d",
                        i, c));
    }

  MdpSolution unrestricted = solve_mdp(spec, opts);

  // Initial shared policy: occupancy-weighted average of the unrestricted
  // one, masked to the shared-allowed set.
  std::vector<double> shared(static_cast<std::size_t>(qt.num_classes) * S * A,
                             0.0);
  auto sd = [&](int c, int i, int k) -> double& {
    return shared[(static_cast<std::size_t>(c) * S + i) * A + k];
  };
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < S; ++i) {
      double xw = 0.0;
      for (int k = 0; k < A; ++k) xw += unrestricted.occupancy.at(t, i, k);
      for (int k = 0; k < A; ++k)
        if (sa(qt.klass[t], i, k))
          sd(qt.klass[t], i, k) +=
              (1e-12 + xw) * unrestricted.policy.at(t, i, k);
    }
  for (int c = 0; c < qt.num_classes; ++c)
    for (int i = 0; i < S; ++i) {
      double total = 0.0;
      for (int k = 0; k < A; ++k) total += sd(c, i, k);
      if (total <= 0) {
        for (int k = 0; k < A; ++k)
          if (sa(c, i, k)) {
            sd(c, i, k) = 1.0;
            break;
          }
        total = 1.0;
      }
      for (int k = 0; k < A; ++k) sd(c, i, k) /= total;
    }

  auto expand = [&](const std::vector<double>& sh) {
    Policy pol;
    pol.num_states = S;
    pol.num_actions = A;
    pol.period = T;
    pol.d.assign(static_cast<std::size_t>(S) * A * T, 0.0);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < S; ++i)
        for (int k = 0; k < A; ++k)
          pol.at(t, i, k) = sh[(static_cast<std::size_t>(qt.klass[t]) * S + i) *
                                   A +
                               k];
    return pol;
  };

  Policy best_policy = expand(shared);
  double best_cost = policy_cycle_cost(spec, best_policy);

  for (int round = 0; round < 100; ++round) {
    Policy current = expand(shared);
    InducedChain ch = induce(spec, current);

    // Cyclostationary occupancies of the current policy.
    VectorXd x0 = cycle_stationary(ch.Q);
    std::vector<VectorXd> x(T);
    x[0] = x0;
    for (int t = 0; t + 1 < T; ++t) x[t + 1] = ch.Q[t].transpose() * x[t];
    double cost_now = 0.0;
    for (int t = 0; t < T; ++t) cost_now += x[t].dot(ch.cost[t]);
    double gbar = cost_now / T;

    // Periodic Poisson equation for the bias by backward fixed point.
    std::vector<VectorXd> h(T + 1, VectorXd::Zero(S));
    for (int pass = 0; pass < 500; ++pass) {
      h[T] = h[0];
      for (int t = T - 1; t >= 0; --t)
        h[t] = ch.cost[t].array() - gbar + (ch.Q[t] * h[t + 1]).array();
      double shift = h[0][0];
      double delta = 0.0;
      for (int t = 0; t <= T; ++t) h[t].array() -= shift;
      delta = (h[T] - h[0]).lpNorm<Eigen::Infinity>();
      if (delta < 1e-11) break;
    }

    // Best response per (class, state), occupancy weighted.
    std::vector<double> improved(shared.size(), 0.0);
    for (int c = 0; c < qt.num_classes; ++c)
      for (int i = 0; i < S; ++i) {
        int best_k = -1;
        double best_v = kInfinity;
        for (int k = 0; k < A; ++k) {
          if (!sa(c, i, k)) continue;
          double v = 0.0;
          for (int t = 0; t < T; ++t) {
            if (qt.klass[t] != c) continue;
            double future = 0.0;
            for (const auto& tr : spec.kernel(t, i, k))
              future += tr.prob * h[t + 1 == T ? 0 : t + 1][tr.to];
            v += x[t][i] * (spec.cost(t, i, k) + future);
          }
          if (v < best_v - 1e-15) {
            best_v = v;
            best_k = k;
          }
        }
        improved[(static_cast<std::size_t>(c) * S + i) * A + best_k] = 1.0;
      }

    double cost_improved = policy_cycle_cost(spec, expand(improved));
    if (cost_improved < best_cost - 1e-9 * (1.0 + std::abs(best_cost))) {
      best_cost = cost_improved;
      best_policy = expand(improved);
      shared = improved;
    } else {
      break;
    }
  }

  MdpSolution out;
  out.policy = best_policy;
  out.cycle_cost = best_cost;
  out.note =
      "heuristic (iterated best response); locally optimal shared policy";
  // Occupancy induced by the final shared policy.
  InducedChain ch = induce(spec, best_policy);
  VectorXd x0 = cycle_stationary(ch.Q);
  out.occupancy.num_states = S;
  out.occupancy.num_actions = A;
  out.occupancy.period = T;
  out.occupancy.y.assign(best_policy.d.size(), 0.0);
  VectorXd xt = x0;
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < A; ++k)
        out.occupancy.at(t, i, k) = xt[i] * best_policy.at(t, i, k);
    xt = ch.Q[t].transpose() * xt;
  }
  out.lp_iterations = unrestricted.lp_iterations;
  return out;
}

}  // namespace cyclomdp
