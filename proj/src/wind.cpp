#include "cyclomdp/wind.hpp"

#include <cmath>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

int WindSystemSpec::num_thermal_levels() const {
  return static_cast<int>(std::round(ccgt_capacity_mw / ccgt_ramp_mw)) + 1;
}

void WindSystemSpec::validate() const {
  require(turbine_rated_mw > 0 && turbine_count > 0 && ccgt_capacity_mw > 0 &&
              ccgt_ramp_mw > 0 && production_cost_per_mwh > 0 &&
              unserved_cost_per_mwh > 0 && net_demand_block_mw > 0 &&
              hours_per_step > 0,
          "WindSystemSpec: capacities and costs must be positive");
  double levels = ccgt_capacity_mw / ccgt_ramp_mw;
  require(std::abs(levels - std::round(levels)) <= 1e-9,
          "WindSystemSpec: ramp step must divide CCGT capacity");
  require(power_curve.cut_in_ms >= 0 &&
              power_curve.rated_ms > power_curve.cut_in_ms &&
              power_curve.cut_out_ms > power_curve.rated_ms,
          "WindSystemSpec: power curve must order cut-in < rated < cut-out");
}

double wind_power(double speed_ms, const WindSystemSpec& spec) {
  require(speed_ms >= 0, "wind_power: speed must be nonnegative");
  const PowerCurve& pc = spec.power_curve;
  if (speed_ms < pc.cut_in_ms || speed_ms >= pc.cut_out_ms) return 0.0;
  if (speed_ms >= pc.rated_ms) return spec.turbine_rated_mw;
  double v3 = speed_ms * speed_ms * speed_ms;
  double ci3 = pc.cut_in_ms * pc.cut_in_ms * pc.cut_in_ms;
  double r3 = pc.rated_ms * pc.rated_ms * pc.rated_ms;
  return spec.turbine_rated_mw * (v3 - ci3) / (r3 - ci3);
}

Series net_demand(const Series& demand, const Series& wind_speed,
                  const WindSystemSpec& spec, std::pair<int, int>* unmatched) {
  spec.validate();
  Series out;
  out.unit = "MW";
  std::size_t a = 0, b = 0;
  int drop_a = 0, drop_b = 0;
  while (a < demand.records.size() && b < wind_speed.records.size()) {
    std::int64_t ta = demand.records[a].timestamp;
    std::int64_t tb = wind_speed.records[b].timestamp;
    if (ta < tb) {
      ++a;
      ++drop_a;
    } else if (tb < ta) {
      ++b;
      ++drop_b;
    } else {
      double nd = demand.records[a].value -
                  spec.turbine_count *
                      wind_power(wind_speed.records[b].value, spec);
      out.records.push_back({ta, nd});
      ++a;
      ++b;
    }
  }
  drop_a += static_cast<int>(demand.records.size() - a);
  drop_b += static_cast<int>(wind_speed.records.size() - b);
  if (unmatched) *unmatched = {drop_a, drop_b};
  require(!out.records.empty(),
          "net_demand: demand and wind series share no timestamps");
  out.step_seconds = demand.step_seconds;
  return out;
}

std::vector<double> ccgt_time_grid(int representative_days) {
  require(representative_days >= 1 && representative_days <= 365,
          "ccgt_time_grid: representative_days in 1..365");
  std::vector<double> grid;
  grid.reserve(representative_days * 24);
  for (int d = 0; d < representative_days; ++d) {
    int day_of_year = d * 365 / representative_days;
    for (int h = 0; h < 24; ++h)
      grid.push_back(day_of_year * 24.0 + h);
  }
  return grid;
}

MdpSpec build_ccgt_mdp(const WindSystemSpec& spec,
                       const InflowKernel& kernel) {
  spec.validate();
  const int m = kernel.num_states;
  const int L = spec.num_thermal_levels();
  const int T = kernel.period;
  const double hours = spec.hours_per_step;

  MdpSpec mdp;
  mdp.resize(m * L, 3, T);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd& P = kernel.transition[t];
    for (int q = 1; q <= m; ++q) {
      const BlockDistribution& nd = kernel.dist[t][q - 1];
      for (int level = 0; level < L; ++level) {
        int state = (q - 1) * L + level;
        double level_mw = level * spec.ccgt_ramp_mw;
        double expected_short = 0.0;
        for (std::size_t b = 0; b < nd.support.size(); ++b)
          expected_short +=
              nd.probs[b] * std::max(0.0, nd.support[b] - level_mw);
        double cost = spec.production_cost_per_mwh * level_mw * hours +
                      spec.unserved_cost_per_mwh * expected_short * hours;
        for (int k = 0; k < 3; ++k) {
          int next_level = level + (k - 1);
          if (next_level < 0 || next_level >= L) continue;  // masked
          std::vector<MdpSpec::Transition> row;
          row.reserve(m);
          for (int qn = 1; qn <= m; ++qn) {
            double pq = P(q - 1, qn - 1);
            if (pq <= 0.0) continue;
            row.push_back({(qn - 1) * L + next_level, pq});
          }
          mdp.set_action(t, state, k, cost, std::move(row));
        }
      }
    }
  }
  return mdp;
}

CcgtSystem::CcgtSystem(WindSystemSpec spec, int demand_states,
                       int period_steps)
    : spec_(spec), demand_states_(demand_states), period_(period_steps) {
  spec_.validate();
  require(demand_states >= 1 && period_steps >= 1,
          "CcgtSystem: bad dimensions");
}

int CcgtSystem::num_states() const {
  return demand_states_ * spec_.num_thermal_levels();
}

int CcgtSystem::encode(int driver_state, int internal) const {
  return (driver_state - 1) * spec_.num_thermal_levels() + internal;
}

int CcgtSystem::internal_of(int mdp_state) const {
  return mdp_state % spec_.num_thermal_levels();
}

SystemModel::Step CcgtSystem::step(int internal, int /*driver_state*/,
                                   double driver_value, int action,
                                   std::int64_t /*t*/) const {
  double level_mw = internal * spec_.ccgt_ramp_mw;
  double shortfall = std::max(0.0, driver_value - level_mw);
  double cost =
      spec_.production_cost_per_mwh * level_mw * spec_.hours_per_step +
      spec_.unserved_cost_per_mwh * shortfall * spec_.hours_per_step;
  int next = internal + (action - 1);
  next = std::max(0, std::min(spec_.num_thermal_levels() - 1, next));
  return {next, cost, shortfall * spec_.hours_per_step};
}

}  // namespace cyclomdp
