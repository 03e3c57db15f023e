#include "cyclomdp/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

double eval_quantile(const QuantileCurve& curve, double t) {
  return curve.beta.dot(eval_basis(curve.basis, t));
}

double pinball_loss(double level, double residual) {
  return std::max(level * residual, (level - 1.0) * residual);
}

double total_pinball_loss(const QuantileCurve& curve,
                          std::span<const Observation> data) {
  double total = 0.0;
  for (const auto& ob : data)
    total += pinball_loss(curve.level, ob.x - eval_quantile(curve, ob.t));
  return total;
}

QuantileFit fit_quantile(std::span<const Observation> data, double level,
                         const BasisSpec& basis, const SolverOptions& opts) {
  require(level > 0.0 && level < 1.0,
          strf("fit_quantile: level %g outside (0,1)", level));
  const int d = basis.dimension();
  const int n = static_cast<int>(data.size());
  require(n >= d, strf("fit_quantile: %d observations for %d coefficients", n,
                       d));

  Eigen::MatrixXd design(n, d);
  for (int i = 0; i < n; ++i)
    design.row(i) = eval_basis(basis, data[i].t).transpose();

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < d) {
      auto names = component_names(basis);
      std::string collinear;
      auto perm = qr.colsPermutation().indices();
      for (int j = static_cast<int>(qr.rank()); j < d; ++j) {
        if (!collinear.empty()) collinear += ", ";
        collinear += names[perm[j]];
      }
      fail("fit_quantile: rank-deficient design; collinear components: " +
           collinear);
    }
  }

  // Normalize the response so the fit is exactly scale-equivariant and the
  // LP is well conditioned.
  double scale = 0.0;
  for (const auto& ob : data) scale = std::max(scale, std::abs(ob.x));
  if (scale == 0.0) scale = 1.0;

  // min sum(p*u + (1-p)*v)  s.t.  design*beta + u - v = x,  u, v >= 0.
  LinearProgram lp;
  for (int j = 0; j < d; ++j) lp.add_variable(0.0, -kInfinity, kInfinity);
  for (int i = 0; i < n; ++i) lp.add_variable(level);
  for (int i = 0; i < n; ++i) lp.add_variable(1.0 - level);
  std::vector<int> idx(d + 2);
  std::vector<double> val(d + 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      idx[j] = j;
      val[j] = design(i, j);
    }
    idx[d] = d + i;
    val[d] = 1.0;
    idx[d + 1] = d + n + i;
    val[d + 1] = -1.0;
    lp.add_row(RowSense::Equal, data[i].x / scale, idx, val);
  }

  SolveResult sol = solve_lp(lp, opts);
  if (sol.status != SolveStatus::Optimal)
    fail(strf("fit_quantile: LP solve failed (%s) %s",
              to_string(sol.status), sol.message.c_str()));

  QuantileFit fit;
  fit.curve.level = level;
  fit.curve.basis = basis;
  fit.curve.beta = sol.x.head(d) * scale;
  fit.objective = total_pinball_loss(fit.curve, data);
  fit.lp_iterations = sol.iterations;
  return fit;
}

double pseudo_r2(const QuantileCurve& curve,
                 std::span<const Observation> data) {
  require(!data.empty(), "pseudo_r2: empty data");
  double fit_loss = total_pinball_loss(curve, data);

  // Loss around the unconditional sample quantile: the pinball objective over
  // constants is minimized at an order statistic near n*p; the optimal value
  // is unique even when the minimizer is not.
  std::vector<double> xs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) xs[i] = data[i].x;
  std::sort(xs.begin(), xs.end());
  const double p = curve.level;
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
  auto loss_at = [&](double c) {
    double total = 0.0;
    for (double x : xs) total += pinball_loss(p, x - c);
    return total;
  };
  std::ptrdiff_t center = static_cast<std::ptrdiff_t>(std::ceil(n * p)) - 1;
  double base_loss = kInfinity;
  for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, center - 1);
       k <= std::min(n - 1, center + 1); ++k)
    base_loss = std::min(base_loss, loss_at(xs[k]));

  if (base_loss <= 0.0) return 0.0;  // all data equal
  return 1.0 - fit_loss / base_loss;
}

std::vector<double> QuantileFamily::levels() const {
  std::vector<double> out;
  out.reserve(curves.size());
  for (const auto& c : curves) out.push_back(c.level);
  return out;
}

QuantileFamily make_family(std::vector<QuantileCurve> curves) {
  require(!curves.empty(), "make_family: no curves");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    require(curves[i].level > 0 && curves[i].level < 1,
            "make_family: levels must lie in (0,1)");
    require(curves[i].basis == curves.front().basis,
            "make_family: curves must share one basis");
    if (i > 0)
      require(curves[i].level > curves[i - 1].level,
              "make_family: levels must be strictly increasing");
  }
  QuantileFamily family;
  family.curves = std::move(curves);
  return family;
}

std::vector<double> phase_grid(const BasisSpec& basis, int n) {
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = basis.overall_period * i / n;
  return grid;
}

QuantileFamily repair_crossings(const QuantileFamily& family,
                                std::span<const double> grid) {
  const int m = static_cast<int>(family.curves.size());
  const int g = static_cast<int>(grid.size());
  require(g > 0, "repair_crossings: empty grid");
  const int d = family.basis().dimension();
  require(g >= d, "repair_crossings: grid smaller than basis dimension");

  Eigen::MatrixXd values(g, m);
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < g; ++i)
      values(i, c) = eval_quantile(family.curves[c], grid[i]);

  bool crossed = false;
  for (int i = 0; i < g && !crossed; ++i)
    for (int c = 1; c < m; ++c)
      if (values(i, c) < values(i, c - 1)) {
        crossed = true;
        break;
      }
  if (!crossed) return family;

  // Pointwise isotonic rearrangement: sort the m evaluations at each grid t.
  for (int i = 0; i < g; ++i) {
    std::vector<double> row(m);
    for (int c = 0; c < m; ++c) row[c] = values(i, c);
    std::sort(row.begin(), row.end());
    for (int c = 0; c < m; ++c) values(i, c) = row[c];
  }

  Eigen::MatrixXd design(g, d);
  for (int i = 0; i < g; ++i)
    design.row(i) = eval_basis(family.basis(), grid[i]).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);

  QuantileFamily repaired = family;
  for (int c = 0; c < m; ++c)
    repaired.curves[c].beta = qr.solve(values.col(c));

  // Least squares can reintroduce tiny crossings between nodes; finish with
  // constant upward shifts computed on a 10x denser grid.
  const int gf = 10 * g;
  std::vector<double> fine(gf);
  double period = family.basis().overall_period;
  for (int i = 0; i < gf; ++i) fine[i] = period * i / gf;
  for (int c = 1; c < m; ++c) {
    double worst = 0.0;
    for (double t : fine)
      worst = std::min(worst, eval_quantile(repaired.curves[c], t) -
                                  eval_quantile(repaired.curves[c - 1], t));
    if (worst < 0.0) repaired.curves[c].beta[0] -= worst;
  }
  return repaired;
}

std::pair<double, double> state_interval(const QuantileFamily& family,
                                         int state, double t) {
  const int m = family.num_states();
  require(state >= 1 && state <= m,
          strf("state_interval: state %d outside 1..%d", state, m));
  double lo = state == 1 ? -kInfinity
                         : eval_quantile(family.curves[state - 2], t);
  double hi = state == m ? kInfinity
                         : eval_quantile(family.curves[state - 1], t);
  return {lo, hi};
}

}  // namespace cyclomdp
