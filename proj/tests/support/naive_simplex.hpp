// Textbook dense two-phase tableau simplex, used only as an independent
// reference for solver tests. Variables are nonnegative; rows may be
// <=, =, or >=. Bland's rule, no scaling, no sparsity.
#pragma once

#include <cmath>
#include <vector>

namespace testsupport {

enum class NaiveStatus { Optimal, Infeasible, Unbounded };

struct NaiveResult {
  NaiveStatus status = NaiveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

class NaiveSimplex {
 public:
  // senses: -1 for <=, 0 for =, +1 for >=
  NaiveResult solve(const std::vector<double>& c,
                    const std::vector<std::vector<double>>& A,
                    const std::vector<double>& b,
                    const std::vector<int>& senses) {
    const int m = static_cast<int>(A.size());
    const int n = static_cast<int>(c.size());

    // Normalize to b >= 0.
    std::vector<std::vector<double>> rows = A;
    std::vector<double> rhs = b;
    std::vector<int> sense = senses;
    for (int i = 0; i < m; ++i)
      if (rhs[i] < 0) {
        for (double& v : rows[i]) v = -v;
        rhs[i] = -rhs[i];
        sense[i] = -sense[i];
      }

    // Columns: structural, slacks/surplus, artificials.
    int num_slack = 0, num_art = 0;
    for (int i = 0; i < m; ++i) {
      if (sense[i] < 0)
        ++num_slack;  // slack, basic
      else if (sense[i] > 0) {
        ++num_slack;  // surplus
        ++num_art;
      } else {
        ++num_art;
      }
    }
    int total = n + num_slack + num_art;
    std::vector<std::vector<double>> T(m, std::vector<double>(total + 1, 0.0));
    std::vector<int> basis(m, -1);
    int slack_pos = n, art_pos = n + num_slack;
    std::vector<int> artificials;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) T[i][j] = rows[i][j];
      T[i][total] = rhs[i];
      if (sense[i] < 0) {
        T[i][slack_pos] = 1.0;
        basis[i] = slack_pos++;
      } else if (sense[i] > 0) {
        T[i][slack_pos] = -1.0;
        ++slack_pos;
        T[i][art_pos] = 1.0;
        basis[i] = art_pos;
        artificials.push_back(art_pos++);
      } else {
        T[i][art_pos] = 1.0;
        basis[i] = art_pos;
        artificials.push_back(art_pos++);
      }
    }

    // Phase 1: minimize sum of artificials.
    if (!artificials.empty()) {
      std::vector<double> cost(total, 0.0);
      for (int a : artificials) cost[a] = 1.0;
      if (!run(T, basis, cost, total)) return {NaiveStatus::Unbounded, 0, {}};
      double art_value = 0.0;
      for (int i = 0; i < m; ++i)
        if (cost[basis[i]] > 0) art_value += T[i][total];
      if (art_value > 1e-7) return {NaiveStatus::Infeasible, 0, {}};
      // Pivot remaining artificials out where possible.
      for (int i = 0; i < m; ++i) {
        if (cost[basis[i]] == 0.0) continue;
        for (int j = 0; j < n + num_slack; ++j)
          if (std::abs(T[i][j]) > 1e-9) {
            pivot(T, basis, i, j);
            break;
          }
      }
    }

    // Phase 2 on the original objective; artificial columns frozen.
    std::vector<double> cost(total, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = c[j];
    for (int a : artificials) cost[a] = 1e30;  // keep them out
    if (!run(T, basis, cost, total)) return {NaiveStatus::Unbounded, 0, {}};

    NaiveResult res;
    res.status = NaiveStatus::Optimal;
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
      if (basis[i] < n) res.x[basis[i]] = T[i][total];
    res.objective = 0.0;
    for (int j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    return res;
  }

 private:
  static void pivot(std::vector<std::vector<double>>& T,
                    std::vector<int>& basis, int row, int col) {
    double pv = T[row][col];
    for (double& v : T[row]) v /= pv;
    for (std::size_t i = 0; i < T.size(); ++i) {
      if (static_cast<int>(i) == row) continue;
      double f = T[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < T[i].size(); ++j) T[i][j] -= f * T[row][j];
    }
    basis[row] = col;
  }

  // Bland's rule; returns false on unbounded.
  static bool run(std::vector<std::vector<double>>& T, std::vector<int>& basis,
                  const std::vector<double>& cost, int total) {
    const int m = static_cast<int>(T.size());
    for (int iter = 0; iter < 50000; ++iter) {
      // reduced costs via simplex multipliers on the basis
      std::vector<double> y(m, 0.0);
      // z_j = cost_B . column_j ; with unit basis representation after
      // pivoting, reduced cost = cost_j - sum_i cost[basis[i]] * T[i][j]
      int enter = -1;
      for (int j = 0; j < total; ++j) {
        double red = cost[j];
        for (int i = 0; i < m; ++i) red -= cost[basis[i]] * T[i][j];
        if (red < -1e-9) {
          enter = j;
          break;  // Bland: smallest index
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = 0.0;
      for (int i = 0; i < m; ++i) {
        if (T[i][enter] > 1e-11) {
          double ratio = T[i][total] / T[i][enter];
          if (leave < 0 || ratio < best - 1e-12 ||
              (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(T, basis, leave, enter);
    }
    return true;  // iteration cap; treat as converged for test purposes
  }
};

}  // namespace testsupport
