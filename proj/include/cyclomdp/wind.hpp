#pragma once

#include "cyclomdp/discretize.hpp"
#include "cyclomdp/mdp.hpp"
#include "cyclomdp/series.hpp"
#include "cyclomdp/simulate.hpp"

namespace cyclomdp {

struct PowerCurve {
  // Defaults follow the 15 MW reference turbine commonly used for offshore
  // studies; they are configuration, not constants of the method.
  double cut_in_ms = 3.0;
  double rated_ms = 10.59;
  double cut_out_ms = 25.0;
};

// Offshore wind fleet netted against regional demand, backed by one large
// rampable CCGT block.
struct WindSystemSpec {
  double turbine_rated_mw = 15.0;
  int turbine_count = 1446;
  PowerCurve power_curve;
  double ccgt_capacity_mw = 28000.0;
  double ccgt_ramp_mw = 2000.0;
  double production_cost_per_mwh = 50.0;
  double unserved_cost_per_mwh = 1000.0;
  double net_demand_block_mw = 2000.0;
  double hours_per_step = 1.0;

  double total_wind_capacity_mw() const {
    return turbine_rated_mw * turbine_count;
  }
  int num_thermal_levels() const;  // capacity / ramp + 1 (15)
  void validate() const;
};

// Cut-in/rated/cut-out power curve, cubic in speed between cut-in and rated.
// Returns MW for one turbine.
double wind_power(double speed_ms, const WindSystemSpec& spec);

// demand - turbine_count * wind_power(speed), inner-joined on timestamps.
// `unmatched` (optional) receives the number of timestamps dropped from each
// input.
Series net_demand(const Series& demand, const Series& wind_speed,
                  const WindSystemSpec& spec,
                  std::pair<int, int>* unmatched = nullptr);

// Cyclic grid of representative hours: `representative_days` days spread
// uniformly over the year, all 24 hours of each. Returns model times (hours
// since year start), size representative_days * 24.
std::vector<double> ccgt_time_grid(int representative_days);

// MDP states are (net-demand state, thermal level) pairs, demand-major.
// Actions: 0 = ramp down, 1 = stay, 2 = ramp up, masked at the boundary
// levels. The kernel must be built on the same cyclic grid.
MdpSpec build_ccgt_mdp(const WindSystemSpec& spec, const InflowKernel& kernel);

class CcgtSystem final : public SystemModel {
 public:
  CcgtSystem(WindSystemSpec spec, int demand_states, int period_steps);

  int num_states() const override;
  int num_actions() const override { return 3; }
  int period() const override { return period_; }
  int num_internal() const override { return spec_.num_thermal_levels(); }
  int encode(int driver_state, int internal) const override;
  int internal_of(int mdp_state) const override;
  Step step(int internal, int driver_state, double driver_value, int action,
            std::int64_t t) const override;

  const WindSystemSpec& spec() const { return spec_; }

 private:
  WindSystemSpec spec_;
  int demand_states_;
  int period_;
};

}  // namespace cyclomdp
