#include "cyclomdp/synth.hpp"

#include <cmath>
#include <numbers>

#include "cyclomdp/error.hpp"
#include "cyclomdp/rng.hpp"

namespace cyclomdp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::int64_t kWeekSeconds = 7 * 86400;
constexpr std::int64_t kHourSeconds = 3600;
}  // namespace

Series synth_hydro_inflow(int years, std::uint64_t seed, std::int64_t epoch) {
  require(years >= 1, "synth_hydro_inflow: years >= 1");
  Series out;
  out.unit = "MW";
  out.step_seconds = kWeekSeconds;
  RngStream noise(seed, "hydro-inflow");
  double e = 0.0;
  const int n = years * 52;
  out.records.reserve(n);
  for (int t = 0; t < n; ++t) {
    double w = t % 52;
    // summer-peaking level, winter-widening spread, seasonal persistence
    double mu = 1000.0 + 350.0 * std::cos(kTwoPi * (w - 3.0) / 52.0);
    double sigma = 180.0 + 60.0 * std::cos(kTwoPi * (w - 8.0) / 52.0);
    double rho = 0.55 + 0.25 * std::cos(kTwoPi * w / 52.0);
    e = rho * e + std::sqrt(1.0 - rho * rho) * noise.normal();
    double x = std::max(30.0, mu + sigma * e);
    out.records.push_back({epoch + t * kWeekSeconds, x});
  }
  return out;
}

Series synth_demand(int years, std::uint64_t seed, std::int64_t epoch) {
  require(years >= 1, "synth_demand: years >= 1");
  Series out;
  out.unit = "MW";
  out.step_seconds = kHourSeconds;
  RngStream noise(seed, "demand");
  double e = 0.0;
  const int n = years * 8760;
  out.records.reserve(n);
  for (int t = 0; t < n; ++t) {
    double hod = t % 24;
    double doy = (t / 24) % 365;
    double season = std::cos(kTwoPi * (doy - 15.0) / 365.0);  // winter high
    double diurnal = -1800.0 * std::cos(kTwoPi * hod / 24.0) +
                     900.0 * std::cos(2.0 * kTwoPi * (hod - 1.0) / 24.0);
    double mu = 14000.0 + 2200.0 * season + (1.0 + 0.45 * season) * diurnal;
    e = 0.85 * e + std::sqrt(1.0 - 0.85 * 0.85) * noise.normal();
    out.records.push_back({epoch + t * kHourSeconds, mu + 1250.0 * e});
  }
  return out;
}

Series synth_wind_speed(int years, std::uint64_t seed, std::int64_t epoch) {
  require(years >= 1, "synth_wind_speed: years >= 1");
  Series out;
  out.unit = "m/s";
  out.step_seconds = kHourSeconds;
  RngStream noise(seed, "wind-speed");
  double e = 0.0;
  const int n = years * 8760;
  out.records.reserve(n);
  for (int t = 0; t < n; ++t) {
    double hod = t % 24;
    double doy = (t / 24) % 365;
    double mu = 8.5 + 2.2 * std::cos(kTwoPi * (doy - 350.0) / 365.0) +
                0.6 * std::cos(kTwoPi * (hod - 14.0) / 24.0);
    e = 0.93 * e + std::sqrt(1.0 - 0.93 * 0.93) * noise.normal();
    out.records.push_back({epoch + t * kHourSeconds,
                           std::max(0.0, mu + 2.4 * e)});
  }
  return out;
}

}  // namespace cyclomdp
