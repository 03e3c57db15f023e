#include "cyclomdp/simulate.hpp"

#include <cmath>

#include <doctest.h>

#include "cyclomdp/error.hpp"
#include "cyclomdp/hydro.hpp"

using namespace cyclomdp;

namespace {

// Small hand-built two-state kernel with seasonal persistence.
InflowKernel make_kernel(double stick_amp, int period) {
  InflowKernel kernel;
  kernel.num_states = 2;
  kernel.period = period;
  kernel.block = 100.0;
  kernel.dist.resize(period);
  kernel.transition.resize(period);
  for (int t = 0; t < period; ++t) {
    double stay =
        0.7 + stick_amp * std::cos(2 * M_PI * t / period);
    Eigen::MatrixXd P(2, 2);
    P << stay, 1 - stay, 1 - stay, stay;
    kernel.transition[t] = P;
    BlockDistribution lo;
    lo.time = t;
    lo.state = 1;
    lo.block = 100.0;
    lo.support = {0.0, 100.0};
    lo.probs = {0.6, 0.4};
    BlockDistribution hi;
    hi.time = t;
    hi.state = 2;
    hi.block = 100.0;
    hi.support = {200.0, 300.0};
    hi.probs = {0.5, 0.5};
    kernel.dist[t] = {lo, hi};
  }
  return kernel;
}

PeriodicTransitionModel make_model() {
  PeriodicTransitionModel model;
  model.num_states = 2;
  model.basis = constant_basis(52.0);
  model.pi = Eigen::VectorXd::Constant(2, 0.5);
  model.gamma = {Eigen::VectorXd::Constant(1, 0.7),
                 Eigen::VectorXd::Constant(1, 0.3),
                 Eigen::VectorXd::Constant(1, 0.3),
                 Eigen::VectorXd::Constant(1, 0.7)};
  return model;
}

}  // namespace

TEST_CASE("identity kernel holds the state") {
  InflowKernel kernel = make_kernel(0.0, 4);
  for (auto& P : kernel.transition) P = Eigen::MatrixXd::Identity(2, 2);
  PeriodicTransitionModel model = make_model();
  SamplePath path = simulate_chain(model, kernel, 200, 7);
  for (std::size_t i = 1; i < path.states.size(); ++i)
    CHECK(path.states[i] == path.states[0]);
}

TEST_CASE("same seed reproduces the path exactly") {
  InflowKernel kernel = make_kernel(0.2, 52);
  PeriodicTransitionModel model = make_model();
  SamplePath a = simulate_chain(model, kernel, 5000, 12345);
  SamplePath b = simulate_chain(model, kernel, 5000, 12345);
  CHECK(a.states == b.states);
  CHECK(a.values == b.values);
  SamplePath c = simulate_chain(model, kernel, 5000, 54321);
  CHECK(a.states != c.states);
}

TEST_CASE("long-run state frequencies approach pi") {
  InflowKernel kernel = make_kernel(0.2, 52);
  PeriodicTransitionModel model = make_model();
  SamplePath path = simulate_chain(model, kernel, 200000, 3);
  double ones = 0;
  for (int s : path.states) ones += s == 1;
  CHECK(ones / path.states.size() == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("phase-binned empirical transitions track P(t)") {
  const int T = 12;
  InflowKernel kernel = make_kernel(0.25, T);
  PeriodicTransitionModel model = make_model();
  SamplePath path = simulate_chain(model, kernel, 500000, 11);
  std::vector<Eigen::MatrixXd> counts(T, Eigen::MatrixXd::Zero(2, 2));
  for (std::size_t i = 0; i + 1 < path.states.size(); ++i)
    counts[i % T](path.states[i] - 1, path.states[i + 1] - 1) += 1.0;
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < 2; ++i) {
      double row = counts[t].row(i).sum();
      REQUIRE(row > 0);
      for (int j = 0; j < 2; ++j)
        CHECK(counts[t](i, j) / row ==
              doctest::Approx(kernel.transition[t](i, j)).epsilon(0.08));
    }
}

TEST_CASE("hydro rollout dynamics") {
  HydroSystemSpec spec;
  spec.validate();
  HydroSystem system(spec, 2);

  SUBCASE("full reservoir, max inflow, max thermal: spill, no unmet") {
    auto step = system.step(50, 2, 3000.0, 8, 0);
    CHECK(step.next_internal == 50);
    CHECK(step.unmet == 0.0);
  }
  SUBCASE("empty reservoir, no inflow, no thermal: all demand unmet") {
    auto step = system.step(0, 1, 0.0, 0, 0);
    CHECK(step.next_internal == 0);
    CHECK(step.unmet == doctest::Approx(1400.0 * 168.0));
    CHECK(step.cost == doctest::Approx(1000.0 * 1400.0 * 168.0));
  }
  SUBCASE("zero demand never leaves demand unmet") {
    HydroSystemSpec free_spec = spec;
    free_spec.demand_mw = 0.0;
    HydroSystem idle(free_spec, 2);
    for (int level : {0, 10, 50})
      for (double inflow : {0.0, 300.0})
        for (int action : {0, 4, 8})
          CHECK(idle.step(level, 1, inflow, action, 0).unmet == 0.0);
  }
}

TEST_CASE("rollout accounting and reproducibility") {
  InflowKernel kernel = make_kernel(0.2, 52);
  PeriodicTransitionModel model = make_model();
  SamplePath driver = simulate_chain(model, kernel, 52 * 10, 21);

  HydroSystemSpec spec;
  HydroSystem system(spec, 2);

  // uniform random policy over all 9 actions
  Policy policy;
  policy.num_states = system.num_states();
  policy.num_actions = 9;
  policy.period = 52;
  policy.d.assign(static_cast<std::size_t>(policy.num_states) * 9 * 52,
                  1.0 / 9.0);

  RolloutOptions opts;
  opts.initial_internal = 25;
  RolloutResult a = rollout_policy(system, policy, driver, 99, opts);
  RolloutResult b = rollout_policy(system, policy, driver, 99, opts);
  CHECK(a.report.total_cost == b.report.total_cost);
  CHECK(a.path.actions == b.path.actions);

  double cost_sum = 0.0, unmet_sum = 0.0;
  for (double c : a.report.cost_per_cycle) cost_sum += c;
  for (double u : a.report.unmet_per_cycle) unmet_sum += u;
  CHECK(cost_sum ==
        doctest::Approx(a.report.total_cost).epsilon(1e-9));
  CHECK(unmet_sum ==
        doctest::Approx(a.report.total_unmet).epsilon(1e-9));
  CHECK(a.report.cost_per_cycle.size() == 10);

  // zero-cost system
  HydroSystemSpec cheap = spec;
  cheap.demand_mw = 0.0;
  HydroSystem idle(cheap, 2);
  Policy zero = policy;
  for (auto& d : zero.d) d = 0.0;
  for (int t = 0; t < 52; ++t)
    for (int i = 0; i < idle.num_states(); ++i) zero.at(t, i, 0) = 1.0;
  RolloutResult c = rollout_policy(idle, zero, driver, 99, opts);
  CHECK(c.report.total_cost == 0.0);
  CHECK(c.report.total_unmet == 0.0);
}

TEST_CASE("occupancy summary marginals") {
  OccupancyMeasure y;
  y.num_states = 2;
  y.num_actions = 2;
  y.period = 2;
  y.y = {0.25, 0.25, 0.3, 0.2, 0.1, 0.2, 0.4, 0.3};
  auto marg = occupancy_summary(y);
  CHECK(marg[0][0] == doctest::Approx(0.5));
  CHECK(marg[0][1] == doctest::Approx(0.5));
  CHECK(marg[1][0] == doctest::Approx(0.3));
  CHECK(marg[1][1] == doctest::Approx(0.7));
  for (int t = 0; t < 2; ++t)
    CHECK(marg[t][0] + marg[t][1] == doctest::Approx(1.0).epsilon(1e-8));
}
