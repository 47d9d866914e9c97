#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bohm/errors.hpp"
#include "bohm/propagator.hpp"
#include "test_support.hpp"

using namespace bohm;
using testing::gaussian_1d;
using testing::line_grid;

namespace {

Hamiltonian harmonic(const Grid& g, double omega, double mass = 1.0) {
  std::vector<double> v(g.total_points());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = g.coordinate(i, 0);
    v[i] = 0.5 * mass * omega * omega * x * x;
  }
  Hamiltonian h(g, 1, {mass});
  h.set_scalar_potential(v);
  return h;
}

double mean_position(const SpinorWaveFunction& psi) {
  const auto rho = density(psi);
  double m = 0.0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    m += rho.grid.coordinate(i, 0) * rho.values[i] * rho.grid.cell_volume();
  }
  return m;
}

double l2_distance(const SpinorWaveFunction& a, const SpinorWaveFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.amplitudes().size(); ++i) s += std::norm(a.amplitudes()[i] - b.amplitudes()[i]);
  return std::sqrt(s * a.grid().cell_volume());
}

}  // namespace

TEST_CASE("free Gaussian spreads as the closed form") {
  const Grid g = line_grid(1024, -32.0, 32.0);
  const double sigma = 1.0, t = 4.0;
  auto psi = normalize(gaussian_1d(g, sigma));
  HamiltonianSchedule sched(Hamiltonian(g, 1, {1.0}));
  const auto out = evolve_to(psi, sched, t, 0.01).back();
  CHECK(out.time() == doctest::Approx(t));
  const double tau = t / (2.0 * sigma * sigma);
  const double s2 = sigma * sigma * (1.0 + tau * tau);
  const auto rho = density(out);
  double l1 = 0.0;
  for (std::size_t i = 0; i < 1024; ++i) {
    const double x = g.coordinate(i, 0);
    const double exact = std::exp(-x * x / (2.0 * s2)) / std::sqrt(2.0 * std::numbers::pi * s2);
    l1 += std::abs(rho.values[i] - exact) * g.cell_volume();
  }
  CHECK(l1 < 1e-6);
}

TEST_CASE("constant potential contributes a global phase") {
  const Grid g = line_grid(256, -16.0, 16.0);
  const auto psi = normalize(gaussian_1d(g, 1.0, 0.5, 1.0));
  const double c = 0.7, dt = 0.05;
  Hamiltonian free(g, 1, {1.0});
  Hamiltonian shifted(g, 1, {1.0});
  shifted.set_scalar_potential(std::vector<double>(256, c));
  const auto a = evolve_step(psi, free, dt);
  const auto b = evolve_step(psi, shifted, dt);
  const cplx phase = std::polar(1.0, -c * dt);
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(std::abs(b.amplitudes()[i] - phase * a.amplitudes()[i]) < 1e-12);
  }
  const auto ra = density(a).values, rb = density(b).values;
  for (std::size_t i = 0; i < 256; ++i) CHECK(std::abs(ra[i] - rb[i]) < 1e-12);
}

TEST_CASE("coherent state follows the classical orbit") {
  const Grid g = line_grid(256, -16.0, 16.0);
  const double omega = 1.0, x0 = 3.0;
  // Ground-state density width sqrt(hbar / 2 m omega).
  auto psi = normalize(gaussian_1d(g, std::sqrt(0.5), x0));
  Propagator prop(HamiltonianSchedule(harmonic(g, omega)), 0.005);
  const double period = 2.0 * std::numbers::pi / omega;
  double worst = 0.0;
  for (int k = 1; k <= 16; ++k) {
    const double t = period * k / 16.0;
    while (psi.time() < t) prop.step(psi, t);
    worst = std::max(worst, std::abs(mean_position(psi) - x0 * std::cos(omega * t)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("evolve_to schedule handling") {
  const Grid g = line_grid(128, -16.0, 16.0);
  const auto psi = normalize(gaussian_1d(g, 1.0));
  HamiltonianSchedule sched(harmonic(g, 1.0));

  const auto same = evolve_to(psi, sched, 0.0, 0.01);
  REQUIRE(same.size() == 1);
  for (std::size_t i = 0; i < 128; ++i) CHECK(same[0].amplitudes()[i] == psi.amplitudes()[i]);

  const double times[] = {0.123, 0.5};
  const auto snaps = evolve_to(psi, sched, 1.0, 0.03, times);
  REQUIRE(snaps.size() == 2);
  CHECK(snaps[0].time() == 0.123);
  CHECK(snaps[1].time() == 0.5);
}

TEST_CASE("second-order convergence on the harmonic well") {
  const Grid g = line_grid(256, -16.0, 16.0);
  const auto psi = normalize(gaussian_1d(g, 1.0, 2.0, 0.5));
  HamiltonianSchedule sched(harmonic(g, 1.0));
  const double dt = 0.02, t = 2.0;
  const auto ref = evolve_to(psi, sched, t, dt / 8.0).back();
  const double e1 = l2_distance(evolve_to(psi, sched, t, dt).back(), ref);
  const double e2 = l2_distance(evolve_to(psi, sched, t, dt / 2.0).back(), ref);
  CAPTURE(e1);
  CAPTURE(e2);
  const double ratio = e1 / e2;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("energy expectation") {
  const Grid g = line_grid(128, 0.0, 2.0 * std::numbers::pi);
  const int p = 5;
  const auto plane = normalize(SpinorWaveFunction::from_function(
      g, [&](std::span<const double> q) { return std::polar(1.0, p * q[0]); }));
  CHECK(std::abs(energy_expectation(plane, Hamiltonian(g, 1, {2.0})) - p * p / 4.0) < 1e-10);

  const Grid h = line_grid(256, -16.0, 16.0);
  const auto ground = normalize(gaussian_1d(h, std::sqrt(0.5)));
  const auto well = harmonic(h, 1.0);
  const double e0 = energy_expectation(ground, well);
  CHECK(std::abs(e0 - 0.5) < 1e-6);

  std::vector<double> shifted(256);
  for (std::size_t i = 0; i < 256; ++i) shifted[i] = 0.5 * h.coordinate(i, 0) * h.coordinate(i, 0) + 1.25;
  Hamiltonian well_c(h, 1, {1.0});
  well_c.set_scalar_potential(shifted);
  CHECK(std::abs(energy_expectation(ground, well_c) - e0 - 1.25) < 1e-12);

  CHECK_THROWS_AS(energy_expectation(plane, well), GridMismatch);
}

TEST_CASE("unitarity and energy conservation over many steps") {
  const Grid g = line_grid(128, -12.0, 12.0);
  const auto h = harmonic(g, 1.0);
  auto psi = normalize(gaussian_1d(g, 0.9, 1.5, -0.4));
  const double e0 = energy_expectation(psi, h);
  const SplitStepper stepper(h, default_time_step(h));
  for (int i = 0; i < 10000; ++i) stepper.step(psi);
  CHECK(std::abs(norm_squared(psi) - 1.0) < 1e-10);
  CHECK(std::abs(energy_expectation(psi, h) - e0) / std::abs(e0) < 1e-6);
}

TEST_CASE("time reversal") {
  const Grid g({{32, -8.0, 8.0}, {16, -4.0, 4.0}});
  auto psi = normalize(testing::random_wavefunction(g, 2, 7));
  Hamiltonian h(g, 2, {1.0, 3.0});
  std::vector<cplx> v(4 * g.total_points());
  for (std::size_t c = 0; c < g.total_points(); ++c) {
    const double x = g.coordinate(c, 0), y = g.coordinate(c, 1);
    v[4 * c + 0] = 0.1 * x * x;
    v[4 * c + 1] = cplx(0.3, 0.2 * y);
    v[4 * c + 2] = cplx(0.3, -0.2 * y);
    v[4 * c + 3] = -0.05 * y * y;
  }
  h.set_potential(v);
  const auto back = evolve_step(evolve_step(psi, h, 0.01), h, -0.01);
  for (std::size_t i = 0; i < psi.amplitudes().size(); ++i) {
    CHECK(std::abs(back.amplitudes()[i] - psi.amplitudes()[i]) < 1e-10);
  }
  CHECK(back.time() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("spin mixing under a uniform transverse field") {
  // H = Omega sigma_x commutes with the kinetic term: P_up(t) = cos^2(Omega t).
  const Grid g = line_grid(64, -8.0, 8.0);
  const auto phi = normalize(gaussian_1d(g, 1.0));
  SpinorWaveFunction psi(g, 2);
  for (std::size_t i = 0; i < 64; ++i) psi.component(0)[i] = phi.amplitudes()[i];
  const double omega = 0.8;
  std::vector<cplx> v(4 * 64);
  for (std::size_t c = 0; c < 64; ++c) v[4 * c + 1] = v[4 * c + 2] = omega;
  Hamiltonian h(g, 2, {1.0});
  h.set_potential(v);
  CHECK_FALSE(h.potential_is_diagonal());
  const auto out = evolve_to(psi, HamiltonianSchedule(h), 1.3, 0.01).back();
  double up = 0.0;
  for (const cplx& z : out.component(0)) up += std::norm(z) * g.cell_volume();
  CHECK(std::abs(up - std::pow(std::cos(omega * 1.3), 2)) < 1e-12);
}

TEST_CASE("hamiltonian validation") {
  const Grid g = line_grid(16, 0.0, 1.0);
  Hamiltonian h(g, 2, {1.0});
  std::vector<cplx> v(4 * 16);
  v[1] = cplx(0.0, 1.0);
  v[2] = cplx(0.0, 1.0);
  CHECK_THROWS_AS(h.set_potential(v), InvalidArgument);
  CHECK_THROWS_AS(Hamiltonian(g, 1, {0.0}), InvalidArgument);
  const auto psi = normalize(gaussian_1d(line_grid(32, 0.0, 1.0), 0.1, 0.5));
  CHECK_THROWS_AS(evolve_step(psi, Hamiltonian(g, 1, {1.0}), 0.1), GridMismatch);
  CHECK_THROWS_AS(evolve_step(psi, Hamiltonian(psi.grid(), 1, {1.0}), 0.0), InvalidArgument);
}

TEST_CASE("piecewise schedule switches exactly") {
  const Grid g = line_grid(128, -16.0, 16.0);
  Hamiltonian off(g, 1, {1.0});
  Hamiltonian on(g, 1, {1.0});
  on.set_scalar_potential(std::vector<double>(128, 2.0));
  HamiltonianSchedule sched(off);
  sched.add_stage(0.25, on);
  sched.add_stage(0.75, off);
  CHECK(sched.stage_index_at(0.25) == 1);
  CHECK(sched.next_switch_after(0.25) == 0.75);
  // The constant potential acts for exactly 0.5 time units.
  const auto psi = normalize(gaussian_1d(g, 1.0));
  const auto a = evolve_to(psi, sched, 1.0, 0.07).back();
  const auto b = evolve_to(psi, HamiltonianSchedule(off), 1.0, 0.07).back();
  const cplx ratio = inner_product(b, a);
  CHECK(std::abs(ratio - std::polar(1.0, -1.0)) < 1e-12);
}
