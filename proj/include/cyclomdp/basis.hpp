#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cyclomdp {

// A finite-dimensional space of periodic functions of time, spanned by
// trigonometric components of one or two commensurate periods.
//
// The component ordering is frozen; serialized coefficient vectors depend
// on it:
//   0                      constant 1
//   single period T:       cos(k w t), sin(k w t) for k = 1..r, w = 2 pi / T
//   two periods [P0, P1]:  constant, then the P0 pairs (cos, sin by
//                          harmonic), then the P1 pairs, then (with cross
//                          terms) for each harmonic pair (i, j) in
//                          lexicographic order the four products
//                          cos_i*cos_j, cos_i*sin_j, sin_i*cos_j,
//                          sin_i*sin_j, where the first factor belongs
//                          to P0 and the second to P1.
//
// Time is a real-valued offset from the caller's epoch in the period's
// units; phases are reduced mod the period before any trig call, so large
// t loses no precision.
struct BasisSpec {
  std::vector<double> periods;
  int harmonic_order = 1;
  bool include_cross_terms = false;
  bool constant_only = false;
  double overall_period = 0.0;  // least common period of `periods`

  int dimension() const;
  bool operator==(const BasisSpec&) const = default;
};

// Validates periods (positive, pairwise commensurate via rational
// reconstruction with relative tolerance 1e-9) and harmonic_order >= 1.
// Only one or two periods are supported.
BasisSpec build_basis(const std::vector<double>& periods, int harmonic_order,
                      bool include_cross_terms = false);

// The d = 1 space containing only the constant function. build_basis
// rejects harmonic_order = 0; this is the dedicated way to get a constant
// model.
BasisSpec constant_basis(double period = 1.0);

void eval_basis(const BasisSpec& spec, double t, std::span<double> out);
Eigen::VectorXd eval_basis(const BasisSpec& spec, double t);

// Human-readable component names in evaluation order, used in diagnostics
// and in the model file format.
std::vector<std::string> component_names(const BasisSpec& spec);

}  // namespace cyclomdp
