#pragma once

#include "cyclomdp/discretize.hpp"
#include "cyclomdp/mdp.hpp"
#include "cyclomdp/simulate.hpp"

namespace cyclomdp {

// Single equivalent-energy reservoir plus dispatchable thermal capacity
// serving a constant demand. Inflows arrive in power-unit blocks; storage is
// quantized into energy blocks with the power-energy bridge
// block_mw * hours_per_step = 1000 * storage_block_gwh checked exactly.
struct HydroSystemSpec {
  double demand_mw = 1400.0;
  double thermal_capacity_mw = 800.0;
  double thermal_block_mw = 100.0;
  double hydro_capacity_mw = 1500.0;
  double reservoir_capacity_gwh = 840.0;
  double storage_block_gwh = 16.8;
  double thermal_cost_per_mwh = 50.0;
  double unserved_cost_per_mwh = 1000.0;
  int period_steps = 52;
  double hours_per_step = 168.0;

  int num_actions() const;         // thermal dispatch levels (9)
  int num_storage_levels() const;  // reservoir blocks + 1 (51)
  void validate() const;
};

// MDP states are (inflow state, storage level) pairs, inflow-major:
// state = (inflow - 1) * num_storage_levels + level.
MdpSpec build_hydro_mdp(const HydroSystemSpec& spec,
                        const InflowKernel& kernel);

// Physical rollout dynamics matching build_hydro_mdp exactly.
class HydroSystem final : public SystemModel {
 public:
  HydroSystem(HydroSystemSpec spec, int inflow_states);

  int num_states() const override;
  int num_actions() const override { return spec_.num_actions(); }
  int period() const override { return spec_.period_steps; }
  int num_internal() const override { return spec_.num_storage_levels(); }
  int encode(int driver_state, int internal) const override;
  int internal_of(int mdp_state) const override;
  Step step(int internal, int driver_state, double driver_value, int action,
            std::int64_t t) const override;

  const HydroSystemSpec& spec() const { return spec_; }

 private:
  HydroSystemSpec spec_;
  int inflow_states_;
};

}  // namespace cyclomdp
