#include "cyclomdp/basis.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

namespace {

// Best rational approximation a/b of x with b <= max_den, by continued
// fractions. Returns false if no approximation is within rel_tol.
bool reconstruct_rational(double x, double rel_tol, std::int64_t max_den,
                          std::int64_t* num, std::int64_t* den) {
  double r = x;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int iter = 0; iter < 64; ++iter) {
    double fl = std::floor(r);
    if (fl > 1e17) break;
    std::int64_t a = static_cast<std::int64_t>(fl);
    std::int64_t p2 = a * p1 + p0;
    std::int64_t q2 = a * q1 + q0;
    if (q2 > max_den || q2 <= 0) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    double approx = static_cast<double>(p1) / static_cast<double>(q1);
    if (std::abs(approx - x) <= rel_tol * std::max(1.0, std::abs(x))) {
      *num = p1;
      *den = q1;
      return true;
    }
    double frac = r - fl;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  return false;
}

// Phase of t within period, in [0, 1).
double phase(double t, double period) {
  double ph = std::fmod(t, period);
  if (ph < 0) ph += period;
  return ph / period;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

int BasisSpec::dimension() const {
  if (constant_only) return 1;
  int r = harmonic_order;
  if (periods.size() == 1) return 2 * r + 1;
  int d = 1 + 4 * r;
  if (include_cross_terms) d += 4 * r * r;
  return d;
}

BasisSpec build_basis(const std::vector<double>& periods, int harmonic_order,
                      bool include_cross_terms) {
  require(!periods.empty(), "build_basis: at least one period required");
  require(periods.size() <= 2,
          "build_basis: at most two periods are supported");
  for (double p : periods)
    require(p > 0 && std::isfinite(p),
            strf("build_basis: period %g is not positive and finite", p));
  require(harmonic_order >= 1,
          "build_basis: harmonic_order must be >= 1 (use constant_basis() "
          "for a constant model)");

  BasisSpec spec;
  spec.periods = periods;
  spec.harmonic_order = harmonic_order;
  spec.include_cross_terms = include_cross_terms && periods.size() == 2;
  spec.constant_only = false;
  spec.overall_period = periods[0];
  if (periods.size() == 2) {
    // periods[1]/periods[0] = n/d  =>  least common period is n*periods[0].
    std::int64_t n = 0, d = 0;
    double ratio = periods[1] / periods[0];
    if (!reconstruct_rational(ratio, 1e-9, 10000, &n, &d))
      fail(strf(
          "build_basis: periods %g and %g are not commensurate (no rational "
          "ratio with denominator <= 1e4 within relative tolerance 1e-9)",
          periods[0], periods[1]));
    spec.overall_period = static_cast<double>(n) * periods[0];
  }
  return spec;
}

BasisSpec constant_basis(double period) {
  require(period > 0 && std::isfinite(period),
          "constant_basis: period must be positive");
  BasisSpec spec;
  spec.periods = {period};
  spec.harmonic_order = 0;
  spec.include_cross_terms = false;
  spec.constant_only = true;
  spec.overall_period = period;
  return spec;
}

void eval_basis(const BasisSpec& spec, double t, std::span<double> out) {
  const int d = spec.dimension();
  require(static_cast<int>(out.size()) == d,
          strf("eval_basis: output span has size %zu, expected %d", out.size(),
               d));
  out[0] = 1.0;
  if (spec.constant_only) return;

  const int r = spec.harmonic_order;
  if (spec.periods.size() == 1) {
    double ph = phase(t, spec.periods[0]);
    for (int k = 1; k <= r; ++k) {
      double arg = kTwoPi * k * ph;
      out[2 * k - 1] = std::cos(arg);
      out[2 * k] = std::sin(arg);
    }
    return;
  }

  double ph0 = phase(t, spec.periods[0]);
  double ph1 = phase(t, spec.periods[1]);
  int pos = 1;
  for (int k = 1; k <= r; ++k) {
    double arg = kTwoPi * k * ph0;
    out[pos++] = std::cos(arg);
    out[pos++] = std::sin(arg);
  }
  for (int k = 1; k <= r; ++k) {
    double arg = kTwoPi * k * ph1;
    out[pos++] = std::cos(arg);
    out[pos++] = std::sin(arg);
  }
  if (spec.include_cross_terms) {
    for (int i = 1; i <= r; ++i) {
      double c0 = out[2 * i - 1];
      double s0 = out[2 * i];
      for (int j = 1; j <= r; ++j) {
        double c1 = out[2 * r + 2 * j - 1];
        double s1 = out[2 * r + 2 * j];
        out[pos++] = c0 * c1;
        out[pos++] = c0 * s1;
        out[pos++] = s0 * c1;
        out[pos++] = s0 * s1;
      }
    }
  }
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double t) {
  Eigen::VectorXd out(spec.dimension());
  eval_basis(spec, t, std::span<double>(out.data(), out.size()));
  return out;
}

std::vector<std::string> component_names(const BasisSpec& spec) {
  std::vector<std::string> names;
  names.reserve(spec.dimension());
  names.push_back("1");
  if (spec.constant_only) return names;

  const int r = spec.harmonic_order;
  auto trig = [&](const char* fn, int k, double period) {
    return strf("%s(2*pi*%d*t/%g)", fn, k, period);
  };
  if (spec.periods.size() == 1) {
    for (int k = 1; k <= r; ++k) {
      names.push_back(trig("cos", k, spec.periods[0]));
      names.push_back(trig("sin", k, spec.periods[0]));
    }
    return names;
  }
  for (int k = 1; k <= r; ++k) {
    names.push_back(trig("cos", k, spec.periods[0]));
    names.push_back(trig("sin", k, spec.periods[0]));
  }
  for (int k = 1; k <= r; ++k) {
    names.push_back(trig("cos", k, spec.periods[1]));
    names.push_back(trig("sin", k, spec.periods[1]));
  }
  if (spec.include_cross_terms) {
    for (int i = 1; i <= r; ++i)
      for (int j = 1; j <= r; ++j) {
        names.push_back(trig("cos", i, spec.periods[0]) + "*" +
                        trig("cos", j, spec.periods[1]));
        names.push_back(trig("cos", i, spec.periods[0]) + "*" +
                        trig("sin", j, spec.periods[1]));
        names.push_back(trig("sin", i, spec.periods[0]) + "*" +
                        trig("cos", j, spec.periods[1]));
        names.push_back(trig("sin", i, spec.periods[0]) + "*" +
                        trig("sin", j, spec.periods[1]));
      }
  }
  return names;
}

}  // namespace cyclomdp
