#include "cyclomdp/chain.hpp"

#include <cmath>

#include <doctest.h>

#include "cyclomdp/error.hpp"
#include "cyclomdp/rng.hpp"

using namespace cyclomdp;

namespace {

QuantileFamily constant_family(std::vector<double> levels,
                               std::vector<double> values) {
  auto basis = constant_basis(52.0);
  std::vector<QuantileCurve> curves;
  for (std::size_t i = 0; i < levels.size(); ++i)
    curves.push_back(
        {levels[i], basis, Eigen::VectorXd::Constant(1, values[i])});
  return make_family(std::move(curves));
}

// The worked two-state sequence from the continued example.
const int kExampleSequence[] = {1, 2, 2, 2, 2, 2, 2, 1, 2, 1, 2,
                                1, 2, 2, 2, 2, 2, 2, 1, 2, 1, 2,
                                1, 2, 2, 1, 1, 1, 1, 1, 1};

TransitionObservations example_observations() {
  TransitionObservations obs;
  obs.num_states = 2;
  for (int k = 0; k + 1 < static_cast<int>(std::size(kExampleSequence)); ++k)
    obs.records.push_back(
        {static_cast<double>(k + 1), kExampleSequence[k],
         kExampleSequence[k + 1]});
  return obs;
}

// Simulates a two-state chain with P11(t) = a + b*cos(2 pi t / period),
// doubly stochastic.
TransitionObservations simulate_two_state(double a, double b, double period,
                                          int n, std::uint64_t seed) {
  TransitionObservations obs;
  obs.num_states = 2;
  RngStream rng(seed, "chain-sim");
  int state = 1;
  for (int t = 0; t < n; ++t) {
    double p_stay_1 = a + b * std::cos(2 * M_PI * t / period);
    double p_stay_2 = p_stay_1;  // doubly stochastic two-state chain
    double stay = state == 1 ? p_stay_1 : p_stay_2;
    int next = rng.next_double() < stay ? state : 3 - state;
    obs.records.push_back({static_cast<double>(t), state, next});
    state = next;
  }
  return obs;
}

}  // namespace

TEST_CASE("assign_state with half-open boundaries") {
  auto family = constant_family({0.1, 0.5, 0.9}, {10.0, 20.0, 30.0});
  CHECK(family.num_states() == 4);
  CHECK(assign_state(family, 0.0, 5.0) == 1);
  CHECK(assign_state(family, 0.0, 10.0) == 2);  // boundary goes up
  CHECK(assign_state(family, 0.0, 15.0) == 2);
  CHECK(assign_state(family, 0.0, 20.0) == 3);
  CHECK(assign_state(family, 0.0, 25.0) == 3);
  CHECK(assign_state(family, 0.0, 30.0) == 4);
  CHECK(assign_state(family, 0.0, 1e9) == 4);
}

TEST_CASE("count_transitions basics and gaps") {
  std::vector<double> times = {1, 2, 3, 4};
  std::vector<int> states = {1, 2, 1, 2};
  Eigen::MatrixXd counts = count_transitions(times, states, 2);
  CHECK(counts(0, 1) == 2);
  CHECK(counts(1, 0) == 1);
  CHECK(counts(0, 0) == 0);
  CHECK(counts(1, 1) == 0);

  std::vector<double> gaptimes = {1, 2, 4, 5};
  std::vector<int> gapstates = {1, 1, 2, 2};
  Eigen::MatrixXd gapped = count_transitions(gaptimes, gapstates, 2);
  CHECK(gapped.sum() == 2);  // the 2 -> 4 pair is skipped
  CHECK(gapped(0, 0) == 1);
  CHECK(gapped(1, 1) == 1);
}

TEST_CASE("worked example sequence tally") {
  std::vector<double> times;
  std::vector<int> states;
  for (int k = 0; k < static_cast<int>(std::size(kExampleSequence)); ++k) {
    times.push_back(k + 1);
    states.push_back(kExampleSequence[k]);
  }
  Eigen::MatrixXd counts = count_transitions(times, states, 2);
  CHECK(counts.sum() == 30);
  // frozen from a direct tally of the printed sequence
  CHECK(counts(0, 0) == 5);
  CHECK(counts(0, 1) == 7);
  CHECK(counts(1, 0) == 7);
  CHECK(counts(1, 1) == 11);

  auto est = estimate_homogeneous(counts);
  CHECK(est.matrix(0, 0) == doctest::Approx(5.0 / 12.0));
  CHECK(est.matrix(0, 1) == doctest::Approx(7.0 / 12.0));
  CHECK(est.matrix(1, 0) == doctest::Approx(7.0 / 18.0));
  CHECK(est.matrix(1, 1) == doctest::Approx(11.0 / 18.0));
}

TEST_CASE("estimate_homogeneous") {
  Eigen::MatrixXd counts(2, 2);
  counts << 2, 2, 1, 3;
  auto est = estimate_homogeneous(counts);
  CHECK(est.matrix(0, 0) == doctest::Approx(0.5));
  CHECK(est.matrix(1, 0) == doctest::Approx(0.25));
  CHECK(est.matrix(1, 1) == doctest::Approx(0.75));
  CHECK(est.never_observed.empty());

  Eigen::MatrixXd ident = 7.0 * Eigen::MatrixXd::Identity(3, 3);
  CHECK(estimate_homogeneous(ident).matrix.isApprox(
      Eigen::MatrixXd::Identity(3, 3)));

  Eigen::MatrixXd zrow(2, 2);
  zrow << 0, 0, 1, 1;
  auto bad = estimate_homogeneous(zrow);
  CHECK(bad.never_observed == std::vector<int>{1});
  CHECK(bad.matrix(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("sinkhorn_balance") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  Eigen::MatrixXd bal = sinkhorn_balance(m, 1e-12);
  CHECK(bal(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(bal(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));

  Eigen::MatrixXd perm(3, 3);
  perm << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  CHECK(sinkhorn_balance(perm).isApprox(perm, 1e-12));

  RngStream rng(4, "sinkhorn");
  Eigen::MatrixXd random(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) random(i, j) = rng.uniform(0.05, 2.0);
  Eigen::MatrixXd out = sinkhorn_balance(random, 1e-10, 1000);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(out.row(i).sum() - 1.0) <= 1e-10);
    CHECK(std::abs(out.col(i).sum() - 1.0) <= 1e-10);
  }
  // fixed point under a second pass
  Eigen::MatrixXd again = sinkhorn_balance(out, 1e-10, 1000);
  CHECK((again - out).lpNorm<Eigen::Infinity>() <= 1e-9);

  Eigen::MatrixXd zero_row(2, 2);
  zero_row << 0, 0, 1, 1;
  CHECK_THROWS_AS(sinkhorn_balance(zero_row), Error);

  // no total support: convergence impossible, error carries the residual
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 1, 0, 1;
  try {
    sinkhorn_balance(bad, 1e-10, 50);
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("stationary_from_levels") {
  std::vector<double> levels = {0.1, 0.5, 0.9};
  Eigen::VectorXd pi = stationary_from_levels(levels);
  CHECK(pi.size() == 4);
  CHECK(pi[0] == doctest::Approx(0.1));
  CHECK(pi[1] == doctest::Approx(0.4));
  CHECK(pi[2] == doctest::Approx(0.4));
  CHECK(pi[3] == doctest::Approx(0.1));
  CHECK(pi.sum() == doctest::Approx(1.0));
}

TEST_CASE("periodic MLE recovers a simulated two-state chain") {
  const double period = 52.0;
  auto obs = simulate_two_state(0.6, 0.3, period, 20000, 99);
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  auto basis = build_basis({period}, 1);
  PeriodicTransitionModel model = fit_periodic_transitions(obs, pi, basis);

  CHECK(model.coeffs(1, 1)[0] == doctest::Approx(0.6).epsilon(0.07));
  CHECK(model.coeffs(1, 1)[1] == doctest::Approx(0.3).epsilon(0.15));
  CHECK(std::abs(model.coeffs(1, 1)[2]) <= 0.04);
  validate_transition_model(model);

  // equally spaced levels force a doubly stochastic P(t)
  for (int g = 0; g < 100; ++g) {
    Eigen::MatrixXd P = eval_transition(model, period * g / 100.0);
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(P.col(j).sum() - 1.0) <= 1e-6);
  }

  // nesting: the periodic fit cannot lose to the constant fit
  PeriodicTransitionModel constant =
      fit_periodic_transitions(obs, pi, constant_basis(period));
  CHECK(neg_log_likelihood(model, obs) <=
        neg_log_likelihood(constant, obs) + 1e-6);
}

TEST_CASE("constant-basis fit equals the constrained count MLE") {
  // With uniform pi and two states the constrained MLE has the closed form
  // p11 = (n11 + n22) / n over matrices [[s, 1-s], [1-s, s]].
  auto obs = simulate_two_state(0.7, 0.0, 52.0, 4000, 123);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& rec : obs.records)
    counts(rec.from - 1, rec.to - 1) += 1.0;
  double closed_form = (counts(0, 0) + counts(1, 1)) / counts.sum();

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  PeriodicTransitionModel fit =
      fit_periodic_transitions(obs, pi, constant_basis(52.0));
  CHECK(fit.coeffs(1, 1)[0] == doctest::Approx(closed_form).epsilon(1e-5));
  CHECK(fit.coeffs(2, 2)[0] == doctest::Approx(closed_form).epsilon(1e-5));
}

TEST_CASE("worked example: constrained fit beats the constrained constant") {
  auto obs = example_observations();
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  auto basis = build_basis({12.0}, 1);  // omega = pi/6

  PeriodicTransitionModel fit = fit_periodic_transitions(obs, pi, basis);
  validate_transition_model(fit);
  // cone constraints of the worked example hold
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j) {
      const auto& g = fit.coeffs(i, j);
      double norm12 = std::hypot(g[1], g[2]);
      CHECK(norm12 <= std::min(g[0], 1.0 - g[0]) + 1e-8);
    }

  PeriodicTransitionModel constant =
      fit_periodic_transitions(obs, pi, constant_basis(12.0));
  CHECK(neg_log_likelihood(fit, obs) <=
        neg_log_likelihood(constant, obs) + 1e-6);
}

TEST_CASE("eval_transition and likelihood") {
  PeriodicTransitionModel model;
  model.num_states = 2;
  model.basis = build_basis({12.0}, 1);
  model.pi = Eigen::VectorXd::Constant(2, 0.5);
  model.gamma.resize(4);
  Eigen::VectorXd g11(3), g12(3), g21(3), g22(3);
  g11 << 0.6, 0.2, -0.1;
  g12 << 0.4, -0.2, 0.1;
  g21 << 0.4, -0.2, 0.1;
  g22 << 0.6, 0.2, -0.1;
  model.coeffs(1, 1) = g11;
  model.coeffs(1, 2) = g12;
  model.coeffs(2, 1) = g21;
  model.coeffs(2, 2) = g22;

  double w = 2 * M_PI / 12.0;
  Eigen::MatrixXd P = eval_transition(model, 1.0);
  CHECK(P(0, 0) ==
        doctest::Approx(0.6 + 0.2 * std::cos(w) - 0.1 * std::sin(w)));
  CHECK(P.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::MatrixXd Pp = eval_transition(model, 1.0 + 12.0);
  CHECK((P - Pp).lpNorm<Eigen::Infinity>() <= 1e-12);

  TransitionObservations single;
  single.num_states = 2;
  single.records.push_back({3.0, 1, 1});
  double p11 = model.coeffs(1, 1).dot(eval_basis(model.basis, 3.0));
  CHECK(neg_log_likelihood(model, single) ==
        doctest::Approx(-std::log(p11)));

  // certain transition has zero contribution
  PeriodicTransitionModel sure;
  sure.num_states = 2;
  sure.basis = constant_basis(12.0);
  sure.pi = Eigen::VectorXd::Constant(2, 0.5);
  sure.gamma = {Eigen::VectorXd::Constant(1, 1.0),
                Eigen::VectorXd::Constant(1, 0.0),
                Eigen::VectorXd::Constant(1, 0.0),
                Eigen::VectorXd::Constant(1, 1.0)};
  TransitionObservations stay;
  stay.num_states = 2;
  stay.records.push_back({0.0, 1, 1});
  CHECK(neg_log_likelihood(sure, stay) == 0.0);

  // additivity over disjoint copies
  TransitionObservations doubled = single;
  doubled.records.push_back(single.records[0]);
  double once = neg_log_likelihood(model, single);
  double twice = neg_log_likelihood(model, doubled);
  CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));

  // zero-probability observation names the record
  TransitionObservations impossible;
  impossible.num_states = 2;
  impossible.records.push_back({0.0, 1, 2});
  try {
    neg_log_likelihood(sure, impossible);
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("observation 0") != std::string::npos);
  }
}

TEST_CASE("observe_series pairs consecutive points") {
  auto family = constant_family({0.5}, {10.0});
  std::vector<Observation> data = {{0, 5}, {1, 15}, {2, 5}, {4, 15}, {5, 15}};
  TransitionObservations obs = observe_series(family, data);
  REQUIRE(obs.records.size() == 3);  // the 2 -> 4 gap is skipped
  CHECK(obs.records[0].from == 1);
  CHECK(obs.records[0].to == 2);
  CHECK(obs.records[1].from == 2);
  CHECK(obs.records[1].to == 1);
  CHECK(obs.records[2].from == 2);
  CHECK(obs.records[2].to == 2);
}
