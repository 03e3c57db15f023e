#pragma once

#include <cstdint>

#include "cyclomdp/series.hpp"

namespace cyclomdp {

// Bundled cyclostationary generators for the demo configurations. All are
// pure functions of (parameters, seed).

// Weekly reservoir inflows (MW): seasonal level and spread with a seasonally
// varying AR(1) driver, 52 weeks per year.
Series synth_hydro_inflow(int years, std::uint64_t seed,
                          std::int64_t epoch = 0);

// Hourly electricity demand (MW): annual + diurnal harmonics with the
// diurnal shape modulated by season (double winter peak), AR(1) noise,
// 8760 hours per year.
Series synth_demand(int years, std::uint64_t seed, std::int64_t epoch = 0);

// Hourly wind speeds (m/s): seasonal mean with persistent AR(1) weather,
// clamped at zero.
Series synth_wind_speed(int years, std::uint64_t seed, std::int64_t epoch = 0);

}  // namespace cyclomdp
