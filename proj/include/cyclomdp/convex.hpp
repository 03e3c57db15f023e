#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cyclomdp/lp.hpp"

namespace cyclomdp {

// Smooth convex program:
//   minimize f(x)
//   subject to  eq_lhs x = eq_rhs,  lower <= x <= upper,
//               ||(u_c(x), v_c(x))|| <= w_c(x)  for each cone row,
// where u, v, w are affine in x. The objective oracle must be convex and
// differentiable on the feasible interior. An affine inequality a.x + b >= 0
// is the degenerate cone with u = v = 0 (see affine_ge).
struct ConvexProgram {
  int num_vars = 0;
  // Returns f(x); fills *grad (same dimension) when non-null.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> objective;

  Eigen::MatrixXd eq_lhs;  // may have zero rows; may be rank-deficient
  Eigen::VectorXd eq_rhs;

  std::vector<double> lower, upper;  // box bounds, defaults -inf / +inf

  struct Affine {
    Eigen::SparseVector<double> coeffs;
    double offset = 0.0;
    double eval(const Eigen::VectorXd& x) const {
      return coeffs.dot(x) + offset;
    }
  };
  struct ConeRow {
    Affine u, v, w;
  };
  std::vector<ConeRow> cones;

  void set_dimension(int n);
  // Convenience: appends the constraint a.x + b >= 0.
  void add_affine_ge(const Eigen::SparseVector<double>& a, double b);
  void add_cone(Affine u, Affine v, Affine w);
};

struct ConvexOptions {
  double kkt_tol = 1e-8;
  bool verbose = false;
  int max_barrier_stages = 40;
  int max_inner_iterations = 1000;
  double barrier_multiplier = 20.0;
};

// Log-barrier interior scheme over the null space of the equality system,
// BFGS inner iterations with backtracking line search. `start` must satisfy
// the equalities to 1e-8 and be strictly interior for bounds and cones.
SolveResult solve_convex(const ConvexProgram& cp, const Eigen::VectorXd& start,
                         double tol, const ConvexOptions& opts = {});

}  // namespace cyclomdp
