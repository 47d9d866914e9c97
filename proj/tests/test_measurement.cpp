#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bohm/errors.hpp"
#include "bohm/measurement.hpp"
#include "test_support.hpp"

using namespace bohm;
using testing::line_grid;

namespace {

MeasurementSetup two_outcome_setup() {
  MeasurementSetup s;
  s.observable = DiscreteObservable::region({-1.0, 1.0}, {{-16.0, 0.0}, {0.0, 15.75}});
  s.pointer = {128, -16.0, 16.0};
  s.pointer_mass = 10.0;
  s.pointer_width = 1.0;
  s.coupling = 5.0;
  s.t_on = 0.0;
  s.t_off = 1.0;
  s.readout_time = 1.5;
  s.outcome_regions = {{-16.0, 0.0}, {0.0, 15.75}};
  s.system_masses = {10.0};
  return s;
}

const Grid kSystem = line_grid(128, -16.0, 16.0);

SpinorWaveFunction system_state(double c_left, double c_right) {
  return normalize(SpinorWaveFunction::from_function(kSystem, [&](std::span<const double> q) {
    return c_left * testing::gaussian_amplitude(q[0], 1.0 / std::sqrt(2.0), -6.0) +
           c_right * testing::gaussian_amplitude(q[0], 1.0 / std::sqrt(2.0), 6.0);
  }));
}

double pointer_mean(const SpinorWaveFunction& psi) {
  const std::size_t keep[] = {1};
  const auto my = marginal(density(psi), keep);
  double m = 0.0;
  for (std::size_t j = 0; j < my.values.size(); ++j) m += my.grid.axis(0).coordinate(j) * my.values[j] * my.grid.axis(0).spacing();
  return m;
}

}  // namespace

TEST_CASE("setup validation") {
  auto s = two_outcome_setup();
  CHECK_NOTHROW(s.validate());
  CHECK(s.pointer_separation() == doctest::Approx(10.0));

  auto weak = s;
  weak.coupling = 2.9;
  try {
    weak.validate();
    FAIL("expected a validation failure");
  } catch (const ValidationFailure& e) {
    CHECK(std::string(e.what()).find("pointer separation") != std::string::npos);
  }
  auto window = s;
  window.t_off = 2.0;
  CHECK_THROWS_AS(window.validate(), ValidationFailure);
  auto overlapping = s;
  overlapping.outcome_regions = {{-16.0, 1.0}, {0.0, 15.75}};
  CHECK_THROWS_AS(overlapping.validate(), ValidationFailure);
  CHECK_THROWS_AS(DiscreteObservable::region({1.0, 1.0}, {{-16.0, 0.0}, {0.0, 15.0}}), ValidationFailure);
  CHECK_THROWS_AS(DiscreteObservable::region({-1.0, 1.0}, {{-16.0, 1.0}, {0.0, 15.0}}), ValidationFailure);
}

TEST_CASE("compose initial product state") {
  const auto s = two_outcome_setup();
  const auto sys = system_state(std::sqrt(0.3), std::sqrt(0.7));
  const auto psi = compose_initial(sys, s);
  CHECK(std::abs(norm_squared(psi) - 1.0) < 1e-12);
  const std::size_t keep_x[] = {0};
  const auto mx = marginal(density(psi), keep_x);
  const auto rho_sys = density(sys);
  for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(mx.values[i] - rho_sys.values[i]) < 1e-12);
  const std::size_t keep_y[] = {1};
  const auto my = marginal(density(psi), keep_y);
  const double w = s.pointer_width;
  for (std::size_t j = 0; j < 128; ++j) {
    const double y = s.pointer.coordinate(j) - s.pointer_center;
    CHECK(std::abs(my.values[j] - std::exp(-y * y / (w * w)) / (std::sqrt(std::numbers::pi) * w)) < 1e-10);
  }
  auto big = s;
  big.pointer = {8192, -16.0, 16.0};
  CHECK_THROWS_AS(compose_initial(SpinorWaveFunction(line_grid(4096, -16.0, 16.0), 1,
                                                     std::vector<cplx>(4096, 1.0)),
                                  big),
                  GridCapExceeded);
}

TEST_CASE("coupling moves the pointer by g k window for eigenstates") {
  auto s = two_outcome_setup();
  s.system_masses = {1e4};
  for (double side : {-1.0, 1.0}) {
    CAPTURE(side);
    const auto sys = side < 0 ? system_state(1.0, 0.0) : system_state(0.0, 1.0);
    const auto psi0 = compose_initial(sys, s);
    const auto sched = measurement_hamiltonian(s, psi0.grid(), 1);
    const auto out = evolve_to(psi0, sched, s.readout_time, 0.01).back();
    CHECK(std::abs(pointer_mean(out) - pointer_mean(psi0) - s.coupling * side * (s.t_off - s.t_on)) < 1e-6);
    const std::size_t keep_x[] = {0};
    const auto before = marginal(density(psi0), keep_x);
    const auto after = marginal(density(out), keep_x);
    for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(after.values[i] - before.values[i]) < 1e-6);
  }
}

TEST_CASE("zero coupling is free evolution") {
  auto s = two_outcome_setup();
  s.coupling = 0.0;
  s.observable = DiscreteObservable::region({1.0}, {{-16.0, 15.75}});
  s.outcome_regions = {{-16.0, 15.75}};
  const auto psi0 = compose_initial(system_state(std::sqrt(0.3), std::sqrt(0.7)), s);
  const auto a = evolve_to(psi0, measurement_hamiltonian(s, psi0.grid(), 1), 1.5, 0.01).back();
  const auto b = evolve_to(psi0, HamiltonianSchedule(Hamiltonian(psi0.grid(), 1, {10.0, 10.0})), 1.5, 0.01).back();
  for (std::size_t i = 0; i < a.amplitudes().size(); ++i) CHECK(std::abs(a.amplitudes()[i] - b.amplitudes()[i]) < 1e-12);
}

TEST_CASE("superposition splits the pointer into weighted lobes") {
  const auto s = two_outcome_setup();
  const auto psi0 = compose_initial(system_state(std::sqrt(0.3), std::sqrt(0.7)), s);
  const auto out = evolve_to(psi0, measurement_hamiltonian(s, psi0.grid(), 1), s.readout_time, 0.01).back();
  const std::size_t keep_y[] = {1};
  const auto my = marginal(density(out), keep_y);
  double lower = 0.0;
  for (std::size_t j = 0; j < 128; ++j) {
    if (my.grid.axis(0).coordinate(j) < 0.0) lower += my.values[j] * my.grid.axis(0).spacing();
  }
  CHECK(std::abs(lower - 0.3) < 1e-4);
  const auto masses = branch_masses(out, s.observable);
  CHECK(std::abs(masses[0] + masses[1] - 1.0) < 1e-9);
}

TEST_CASE("overlap matrix") {
  const Grid g({{128, -16.0, 16.0}, {256, -32.0, 32.0}});
  const auto obs = DiscreteObservable::region({-1.0, 1.0}, {{-16.0, 0.0}, {0.0, 15.75}});
  const double w = 1.0;
  auto lobe = [&](double y, double y0) { return std::exp(-(y - y0) * (y - y0) / (2.0 * w * w)); };
  auto make = [&](double y1, double y2) {
    return normalize(SpinorWaveFunction::from_function(g, [&](std::span<const double> q) {
      return std::exp(-(q[0] + 6.0) * (q[0] + 6.0)) * lobe(q[1], y1) +
             std::exp(-(q[0] - 6.0) * (q[0] - 6.0)) * lobe(q[1], y2);
    }));
  };
  // Separation d = 6 w: off-diagonal sqrt(p1 p2) exp(-d^2 / (4 w^2)).
  const auto sep = overlap_matrix(make(-3.0, 3.0), obs, 1);
  REQUIRE(sep.size() == 2);
  const double oracle = 0.5 * std::exp(-36.0 / (4.0 * w * w));
  CHECK(sep(0, 1) == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(sep.max_off_diagonal() < 1e-4);
  CHECK(std::abs(sep.trace() - 1.0) < 1e-9);

  const auto same = overlap_matrix(make(0.0, 0.0), obs, 1);
  CHECK(std::abs(same(0, 1) - std::sqrt(same(0, 0) * same(1, 1))) < 1e-12);

  const auto single = overlap_matrix(normalize(SpinorWaveFunction::from_function(
                                         g, [&](std::span<const double> q) {
                                           return std::exp(-(q[0] - 6.0) * (q[0] - 6.0)) * lobe(q[1], 2.0);
                                         })),
                                     obs, 1);
  REQUIRE(single.size() == 1);
  CHECK(single.outcomes[0] == 1);
  CHECK(std::abs(single(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("readout and z-scores") {
  const auto s = two_outcome_setup();
  const auto eigen = run_measurement(s, system_state(0.0, 1.0), 2000, 3, 0.01);
  CHECK(eigen.stats.counts[1] + eigen.stats.unassigned == 2000);

  const std::size_t m = 10000;
  const auto run = run_measurement(s, system_state(std::sqrt(0.3), std::sqrt(0.7)), m, 5, 0.01);
  const double sd = std::sqrt(0.21 / m);
  CHECK(std::abs(run.stats.frequencies[0] - 0.3) < 3.0 * sd);
  CHECK(run.stats.counts[0] + run.stats.counts[1] + run.stats.unassigned == m);
  CHECK(run.stats.unassigned == 0);
  CHECK(run.stats.overlap->max_off_diagonal() < 1e-4);
  CHECK(std::abs(run.stats.overlap->trace() - 1.0) < 1e-9);
  CHECK(run.conservation.norm_drift < 1e-10);
  CHECK(run.conservation.energy_drift < 1e-6);
  CHECK(run.final.capped_evaluations == 0);

  // Trajectory frequencies agree with the pointer-region mass.
  const std::size_t keep_y[] = {1};
  const auto my = marginal(density(run.final_state), keep_y);
  const Interval lower[] = {s.outcome_regions[0]};
  const double mass = region_probability(my, lower);
  CHECK(std::abs(run.stats.frequencies[0] - mass) < 3.0 * std::sqrt(mass * (1 - mass) / m));

  // Outcomes are settled once the branches separate.
  auto later = s;
  later.readout_time = 2.5;
  const auto rerun = run_measurement(later, system_state(std::sqrt(0.3), std::sqrt(0.7)), m, 5, 0.01);
  const auto a = assign_outcomes(run.final, s.outcome_regions, 1);
  const auto b = assign_outcomes(rerun.final, s.outcome_regions, 1);
  std::size_t same = 0;
  for (std::size_t i = 0; i < m; ++i) same += a[i] == b[i];
  CHECK(same >= 0.999 * m);

  OutcomeStatistics exact;
  exact.total = m;
  exact.frequencies = {0.3, 0.7};
  exact.targets = {0.3, 0.7};
  for (double z : born_rule_report(exact)) CHECK(z == 0.0);
  exact.frequencies = {0.3 + 3.0 * sd, 0.7 - 3.0 * sd};
  for (double z : born_rule_report(exact)) CHECK(std::abs(std::abs(z) - 3.0) < 1e-12);

  TrajectorySet stray;
  stray.dims = 2;
  stray.positions = {0.0, 0.0, 0.0, 20.0};
  CHECK_THROWS_AS(readout(stray, s, {0.5, 0.5}), TooManyUnassigned);
}

TEST_CASE("Born-rule z-scores across seeds") {
  // 100 independent groups of 10^4 trajectories, run as one ensemble: each
  // group uses its own block of RNG streams.
  const auto s = two_outcome_setup();
  const std::size_t groups = 100, m = 10000;
  const auto run = run_measurement(s, system_state(std::sqrt(0.3), std::sqrt(0.7)), groups * m, 2024, 0.05);
  const auto out = assign_outcomes(run.final, s.outcome_regions, 1);
  int within = 0;
  for (std::size_t k = 0; k < groups; ++k) {
    OutcomeStatistics g;
    g.total = m;
    std::size_t first = 0;
    for (std::size_t i = k * m; i < (k + 1) * m; ++i) first += out[i] == 0;
    g.frequencies = {static_cast<double>(first) / m, 1.0 - static_cast<double>(first) / m};
    g.targets = run.stats.targets;
    const auto z = born_rule_report(g);
    within += std::abs(z[0]) < 3.0 && std::abs(z[1]) < 3.0;
  }
  CHECK(within >= 99);
}

TEST_CASE("Stern-Gerlach") {
  SternGerlachConfig cfg;
  cfg.ensemble_size = 4000;
  cfg.dt = 0.01;

  SUBCASE("pure spin up deflects upward") {
    cfg.alpha = 1.0;
    cfg.beta = 0.0;
    const auto r = stern_gerlach_experiment(cfg);
    CHECK(r.stats.counts[0] == cfg.ensemble_size);
  }
  SUBCASE("weights and no-crossing") {
    const auto r = stern_gerlach_experiment(cfg);
    const double m = static_cast<double>(cfg.ensemble_size);
    CHECK(std::abs(r.stats.frequencies[0] - 0.3) < 3.0 * std::sqrt(0.21 / m));
    CHECK(r.no_crossing);
    CHECK(ordering_preserved(r.history, 0));
    CHECK(r.stats.overlap->max_off_diagonal() < 1e-4);
    CHECK(r.conservation.norm_drift < 1e-10);
    CHECK(r.conservation.energy_drift < 1e-6);

    // Reversed field with the mirrored ensemble swaps the populations.
    auto reversed = cfg;
    reversed.field = -cfg.field;
    TrajectorySet mirrored = r.initial;
    for (double& z : mirrored.positions) z = -z;
    const auto rr = stern_gerlach_experiment(reversed, mirrored);
    CHECK(rr.stats.counts[0] == r.stats.counts[1]);
    CHECK(rr.stats.counts[1] == r.stats.counts[0]);
  }
  SUBCASE("equal superposition splits at the median") {
    cfg.alpha = 1.0 / std::sqrt(2.0);
    cfg.beta = 1.0 / std::sqrt(2.0);
    const auto r = stern_gerlach_experiment(cfg);
    const double m = static_cast<double>(cfg.ensemble_size);
    CHECK(std::abs(r.stats.frequencies[0] - 0.5) < 3.0 * std::sqrt(0.25 / m));
    for (std::size_t i = 0; i < cfg.ensemble_size; ++i) {
      if (r.initial.positions[i] > 0.0) CHECK(r.outcomes[i] == 0);
    }
  }
}
