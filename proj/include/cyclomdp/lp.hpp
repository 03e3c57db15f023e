#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cyclomdp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RowSense : char { LessEqual = 'L', Equal = 'E', GreaterEqual = 'G' };

// Sparse linear program: minimize objective . x subject to the rows and the
// per-variable bounds (defaults 0 and +infinity).
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;

  struct Row {
    RowSense sense = RowSense::Equal;
    double rhs = 0.0;
    std::vector<int> index;
    std::vector<double> value;
  };
  std::vector<Row> rows;

  int add_variable(double cost, double lo = 0.0, double hi = kInfinity);
  void add_row(RowSense sense, double rhs, std::span<const int> index,
               std::span<const double> value);
  void validate() const;  // throws on inconsistent dimensions / non-finite data
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };
const char* to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::IterationLimit;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  // Relative residual metrics at the returned point.
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string message;
};

// Every numeric tolerance used by the optimization engines, in one place.
struct SolverOptions {
  // Targets; the solver keeps iterating toward these while it makes progress.
  double primal_tol = 1e-10;
  double dual_tol = 1e-10;
  double gap_tol = 1e-11;
  // Contract-level tolerances accepted once progress stalls.
  double primal_tol_loose = 1e-8;
  double dual_tol_loose = 1e-8;
  double gap_tol_loose = 1e-8;
  int max_iterations = 200;
  // Static regularization of the augmented KKT system.
  double primal_regularization = 1e-8;
  double dual_regularization = 1e-8;
  int refinement_steps = 2;
  // Divergence thresholds used to classify infeasible / unbounded problems.
  double divergence_threshold = 1e11;
  bool verbose = false;  // per-iteration trace on stderr
};

// Deterministic primal-dual interior-point solve (Mehrotra
// predictor-corrector on the regularized augmented system). Identical input
// produces bitwise-identical output.
SolveResult solve_lp(const LinearProgram& lp, const SolverOptions& opts = {});

// Dump in CPLEX LP exchange format for cross-checking with external solvers.
void write_lp_format(const LinearProgram& lp, std::ostream& os);

}  // namespace cyclomdp
