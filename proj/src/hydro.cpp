#include "cyclomdp/hydro.hpp"

#include <cmath>
#include <map>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

namespace {

bool divides(double part, double whole) {
  double ratio = whole / part;
  return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

struct HydroStep {
  int next_level;
  double thermal_mw;
  double unserved_mw;
};

HydroStep hydro_dynamics(const HydroSystemSpec& spec, int level,
                         int inflow_blocks, int action) {
  const double block = spec.thermal_block_mw;
  const int demand_b = static_cast<int>(std::round(spec.demand_mw / block));
  const int hydro_cap_b =
      static_cast<int>(std::round(spec.hydro_capacity_mw / block));
  const int top = static_cast<int>(
      std::round(spec.reservoir_capacity_gwh / spec.storage_block_gwh));
  int release = std::min({demand_b - action, hydro_cap_b,
                          level + inflow_blocks});
  release = std::max(release, 0);
  int unserved = std::max(0, demand_b - action - release);
  int next = std::min(top, level + inflow_blocks - release);  // spill above
  return {next, action * block, unserved * block};
}

}  // namespace

int HydroSystemSpec::num_actions() const {
  return static_cast<int>(std::round(thermal_capacity_mw / thermal_block_mw)) +
         1;
}

int HydroSystemSpec::num_storage_levels() const {
  return static_cast<int>(
             std::round(reservoir_capacity_gwh / storage_block_gwh)) +
         1;
}

void HydroSystemSpec::validate() const {
  require(demand_mw >= 0 && thermal_capacity_mw > 0 && thermal_block_mw > 0 &&
              hydro_capacity_mw > 0 && reservoir_capacity_gwh > 0 &&
              storage_block_gwh > 0 && thermal_cost_per_mwh > 0 &&
              unserved_cost_per_mwh > 0 && period_steps > 0 &&
              hours_per_step > 0,
          "HydroSystemSpec: capacities, costs and steps must be positive");
  require(divides(thermal_block_mw, thermal_capacity_mw),
          "HydroSystemSpec: thermal block must divide thermal capacity");
  require(divides(storage_block_gwh, reservoir_capacity_gwh),
          "HydroSystemSpec: storage block must divide reservoir capacity");
  require(divides(thermal_block_mw, demand_mw),
          "HydroSystemSpec: thermal block must divide demand");
  require(divides(thermal_block_mw, hydro_capacity_mw),
          "HydroSystemSpec: thermal block must divide hydro capacity");
  // power-energy bridge: one step of one block in MW equals one storage block
  double bridge = thermal_block_mw * hours_per_step / 1000.0;
  require(std::abs(bridge - storage_block_gwh) <= 1e-9 * storage_block_gwh,
          strf("HydroSystemSpec: %g MW over %g h is %g GWh, storage block is "
               "%g GWh",
               thermal_block_mw, hours_per_step, bridge, storage_block_gwh));
}

MdpSpec build_hydro_mdp(const HydroSystemSpec& spec,
                        const InflowKernel& kernel) {
  spec.validate();
  require(kernel.period == spec.period_steps,
          strf("build_hydro_mdp: kernel period %d != system period %d",
               kernel.period, spec.period_steps));
  require(std::abs(kernel.block - spec.thermal_block_mw) <=
              1e-9 * spec.thermal_block_mw,
          strf("build_hydro_mdp: inflow block %g MW != system block %g MW",
               kernel.block, spec.thermal_block_mw));

  const int m = kernel.num_states;
  const int L = spec.num_storage_levels();
  const int A = spec.num_actions();
  const int T = spec.period_steps;
  const double hours = spec.hours_per_step;
  const double block = spec.thermal_block_mw;

  MdpSpec mdp;
  mdp.resize(m * L, A, T);
  std::map<int, double> next_probs;
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd& P = kernel.transition[t];
    for (int q = 1; q <= m; ++q) {
      const BlockDistribution& inflow = kernel.dist[t][q - 1];
      for (int level = 0; level < L; ++level) {
        int state = (q - 1) * L + level;
        for (int k = 0; k < A; ++k) {
          next_probs.clear();
          double expected_cost = spec.thermal_cost_per_mwh * k * block * hours;
          for (std::size_t b = 0; b < inflow.support.size(); ++b) {
            double pb = inflow.probs[b];
            if (pb <= 0.0) continue;
            int inflow_blocks =
                static_cast<int>(std::round(inflow.support[b] / block));
            HydroStep hs = hydro_dynamics(spec, level, inflow_blocks, k);
            expected_cost +=
                pb * spec.unserved_cost_per_mwh * hs.unserved_mw * hours;
            for (int qn = 1; qn <= m; ++qn) {
              double pq = P(q - 1, qn - 1);
              if (pq <= 0.0) continue;
              next_probs[(qn - 1) * L + hs.next_level] += pb * pq;
            }
          }
          std::vector<MdpSpec::Transition> row;
          row.reserve(next_probs.size());
          for (const auto& [to, prob] : next_probs) row.push_back({to, prob});
          mdp.set_action(t, state, k, expected_cost, std::move(row));
        }
      }
    }
  }
  return mdp;
}

HydroSystem::HydroSystem(HydroSystemSpec spec, int inflow_states)
    : spec_(spec), inflow_states_(inflow_states) {
  spec_.validate();
  require(inflow_states >= 1, "HydroSystem: inflow_states >= 1");
}

int HydroSystem::num_states() const {
  return inflow_states_ * spec_.num_storage_levels();
}

int HydroSystem::encode(int driver_state, int internal) const {
  return (driver_state - 1) * spec_.num_storage_levels() + internal;
}

int HydroSystem::internal_of(int mdp_state) const {
  return mdp_state % spec_.num_storage_levels();
}

SystemModel::Step HydroSystem::step(int internal, int /*driver_state*/,
                                    double driver_value, int action,
                                    std::int64_t /*t*/) const {
  int inflow_blocks =
      static_cast<int>(std::round(driver_value / spec_.thermal_block_mw));
  HydroStep hs = hydro_dynamics(spec_, internal, inflow_blocks, action);
  double cost = spec_.thermal_cost_per_mwh * hs.thermal_mw * spec_.hours_per_step +
                spec_.unserved_cost_per_mwh * hs.unserved_mw * spec_.hours_per_step;
  return {hs.next_level, cost, hs.unserved_mw * spec_.hours_per_step};
}

}  // namespace cyclomdp
