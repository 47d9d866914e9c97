#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bohm/equilibrium.hpp"
#include "bohm/errors.hpp"
#include "bohm/guidance.hpp"
#include "test_support.hpp"

using namespace bohm;
using testing::gaussian_1d;
using testing::line_grid;

namespace {

// Free spreading Gaussian (hbar = 1) with initial density width sigma:
// psi(x,t) = (2 pi sigma^2)^(-1/4) (1 + i tau)^(-1/2) exp(-x^2 / (4 sigma^2 (1 + i tau))),
// tau = t / (2 m sigma^2).
cplx spreading_gaussian(double x, double t, double sigma, double m) {
  const cplx s(1.0, t / (2.0 * m * sigma * sigma));
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25) / std::sqrt(s) *
         std::exp(-x * x / (4.0 * sigma * sigma * s));
}

// Bohmian velocity of the spreading Gaussian: v = x sigma'(t) / sigma(t).
double spreading_velocity(double x, double t, double sigma, double m) {
  const double k = 1.0 / (2.0 * m * sigma * sigma);
  return x * t * k * k / (1.0 + t * t * k * k);
}

double spreading_width(double t, double sigma, double m) {
  const double tau = t / (2.0 * m * sigma * sigma);
  return sigma * std::sqrt(1.0 + tau * tau);
}

std::vector<AxisRole> roles_1d(double m = 1.0) { return uniform_roles(line_grid(16, 0.0, 1.0), m); }

VelocityField field_1d(const Grid& g, std::vector<double> v) {
  VelocityField f;
  f.grid = g;
  f.components = {std::move(v)};
  f.node_mask.assign(g.total_points(), 0);
  return f;
}

}  // namespace

TEST_CASE("plane wave velocity") {
  const Grid g = line_grid(128, 0.0, 2.0 * std::numbers::pi);
  const double p = 3.0, m = 1.5;
  const auto psi = normalize(SpinorWaveFunction::from_function(
      g, [&](std::span<const double> q) { return std::polar(1.0, p * q[0]); }));
  const auto roles = roles_1d(m);
  const auto v = velocity_field(psi, roles);
  for (double x : v.components[0]) CHECK(std::abs(x - p / m) < 1e-10);
}

TEST_CASE("real wavefunction has zero velocity") {
  const Grid g({{32, -6.0, 6.0}, {64, -8.0, 8.0}});
  const auto psi = normalize(SpinorWaveFunction::from_function(g, [](std::span<const double> q) {
    return cplx(std::exp(-q[0] * q[0] / 2.0 - q[1] * q[1] / 3.0) * (1.0 + 0.3 * q[1]), 0.0);
  }));
  const auto roles = uniform_roles(g, 1.0);
  const auto v = velocity_field(psi, roles);
  for (const auto& comp : v.components) {
    for (std::size_t c = 0; c < comp.size(); ++c) {
      if (!v.node_mask[c]) CHECK(std::abs(comp[c]) < 1e-12);
    }
  }
}

TEST_CASE("spreading Gaussian velocity matches the analytic field") {
  const Grid g = line_grid(1024, -32.0, 32.0);
  const double sigma = 1.0, m = 1.0, t = 1.7;
  const auto psi = SpinorWaveFunction::from_function(
      g, [&](std::span<const double> q) { return spreading_gaussian(q[0], t, sigma, m); }, t);
  const auto roles = roles_1d(m);
  const auto v = velocity_field(psi, roles);
  const double width = spreading_width(t, sigma, m);
  for (std::size_t i = 0; i < 1024; ++i) {
    const double x = g.coordinate(i, 0);
    if (std::abs(x) > 5.0 * width) continue;
    CHECK(std::abs(v.components[0][i] - spreading_velocity(x, t, sigma, m)) < 1e-8);
  }
}

TEST_CASE("global phase and Galilean boost") {
  const Grid g = line_grid(256, -16.0, 16.0);
  const auto psi = SpinorWaveFunction::from_function(g, [&](std::span<const double> q) {
    return spreading_gaussian(q[0] - 1.0, 0.8, 1.2, 1.0) + 0.4 * spreading_gaussian(q[0] + 3.0, 0.3, 0.9, 1.0);
  });
  const auto roles = roles_1d();
  const auto v = velocity_field(psi, roles);

  SpinorWaveFunction rotated = psi;
  for (cplx& z : rotated.amplitudes()) z *= std::polar(1.0, 2.1);
  const auto vr = velocity_field(rotated, roles);
  // Rounding in the derivative is relative to the largest amplitude, so the
  // comparison covers the cells that carry probability.
  const auto rho = density(psi).values;
  const double peak = *std::max_element(rho.begin(), rho.end());
  for (std::size_t i = 0; i < 256; ++i) {
    if (rho[i] > 1e-3 * peak) CHECK(std::abs(vr.components[0][i] - v.components[0][i]) < 1e-13);
  }

  // u must be a grid wavenumber for the boost to stay periodic.
  const double u = 2.0 * std::numbers::pi * 8.0 / g.axis(0).length();
  SpinorWaveFunction boosted = psi;
  for (std::size_t i = 0; i < 256; ++i) boosted.amplitudes()[i] *= std::polar(1.0, u * g.coordinate(i, 0));
  const auto vb = velocity_field(boosted, roles);
  for (std::size_t i = 0; i < 256; ++i) {
    if (!vb.node_mask[i]) CHECK(std::abs(vb.components[0][i] - v.components[0][i] - u) < 1e-9);
  }
}

TEST_CASE("node masking") {
  const Grid g = line_grid(64, -8.0, 8.0);
  const auto psi = normalize(SpinorWaveFunction::from_function(g, [](std::span<const double> q) {
    return cplx(q[0] * std::exp(-q[0] * q[0]), 0.0);
  }));
  const auto roles = roles_1d();
  const auto v = velocity_field(psi, roles, 1.0, 3.0);
  CHECK(v.node_mask[32] == 1);
  CHECK(v.node_mask[35] == 0);
  CHECK(v.speed_cap == 3.0);
}

TEST_CASE("interpolate velocity") {
  const Grid g = line_grid(16, 0.0, 16.0);
  std::vector<double> ramp(16);
  for (std::size_t i = 0; i < 16; ++i) ramp[i] = g.coordinate(i, 0);
  const auto f = field_1d(g, ramp);
  const double node[] = {5.0};
  CHECK(interpolate_velocity(f, node).v[0] == 5.0);
  const double mid[] = {6.5};
  CHECK(std::abs(interpolate_velocity(f, mid).v[0] - 6.5) < 1e-12);

  const auto flat = field_1d(g, std::vector<double>(16, -0.75));
  for (double x : {0.0, 3.3, 15.9, 17.2, -4.1}) {
    const double q[] = {x};
    CHECK(interpolate_velocity(flat, q).v[0] == -0.75);
  }

  const Grid g2({{8, 0.0, 8.0}, {8, 0.0, 8.0}});
  VelocityField bil;
  bil.grid = g2;
  bil.components.assign(2, std::vector<double>(64));
  bil.node_mask.assign(64, 0);
  for (std::size_t c = 0; c < 64; ++c) {
    bil.components[0][c] = 2.0 * g2.coordinate(c, 0) + g2.coordinate(c, 1);
    bil.components[1][c] = g2.coordinate(c, 0) * g2.coordinate(c, 1);
  }
  const double p2[] = {2.25, 4.5};
  const auto s = interpolate_velocity(bil, p2);
  CHECK(std::abs(s.v[0] - 9.0) < 1e-12);
  CHECK(std::abs(s.v[1] - 10.125) < 1e-12);

  auto masked = field_1d(g, std::vector<double>(16, 100.0));
  masked.node_mask[4] = 1;
  masked.speed_cap = 2.0;
  const double near[] = {4.5};
  const auto capped = interpolate_velocity(masked, near);
  CHECK(capped.capped);
  CHECK(capped.v[0] == doctest::Approx(2.0));
  const double far[] = {9.5};
  CHECK_FALSE(interpolate_velocity(masked, far).capped);
}

TEST_CASE("plane wave trajectories move uniformly") {
  const Grid g = line_grid(64, 0.0, 2.0 * std::numbers::pi);
  const double p = 2.0, dt = 0.3;
  const auto psi = normalize(SpinorWaveFunction::from_function(
      g, [&](std::span<const double> q) { return std::polar(1.0, p * q[0]); }));
  const auto next = evolve_step(psi, Hamiltonian(g, 1, {1.0}), dt);
  TrajectorySet t;
  t.positions = {0.1, 1.7, 4.4, 6.2};
  const auto roles = roles_1d();
  const auto out = advance_trajectories(t, psi, next, roles);
  for (std::size_t i = 0; i < 4; ++i) {
    const double expected = g.wrap(0, t.positions[i] + p * dt);
    CHECK(std::abs(out.positions[i] - expected) < 1e-12);
  }
}

TEST_CASE("spreading Gaussian trajectories follow the closed form") {
  const Grid g = line_grid(1024, -32.0, 32.0);
  const double sigma = 1.0, m = 1.0;
  const double t_end = 2.0 * (2.0 * m * sigma * sigma);
  TrajectorySet t;
  t.positions = {-2.5, -1.0, -0.3, 0.05, 0.5, 1.7, 2.9};
  const auto x0 = t.positions;
  GuidedEnsemble ens(normalize(gaussian_1d(g, sigma)), HamiltonianSchedule(Hamiltonian(g, 1, {m})),
                     t, 0.01, std::numeric_limits<double>::infinity());
  TrajectoryHistory hist;
  hist.record(ens.trajectories());
  ens.run_until(t_end, [&](const GuidedEnsemble& e) { hist.record(e.trajectories()); });
  const double ratio = spreading_width(t_end, sigma, m) / sigma;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double expected = x0[i] * ratio;
    CHECK(std::abs(ens.trajectories().positions[i] - expected) < 1e-4 * std::abs(expected));
  }
  CHECK(ordering_preserved(hist, 0));
  CHECK(ens.trajectories().capped_evaluations == 0);
  const auto cons = ens.conservation();
  CHECK(cons.norm_drift < 1e-10);
  CHECK(cons.energy_drift < 1e-6);
}

TEST_CASE("continuity residual") {
  const auto roles = roles_1d();
  SUBCASE("stationary state") {
    const Grid g = line_grid(256, -16.0, 16.0);
    std::vector<double> v(256);
    for (std::size_t i = 0; i < 256; ++i) v[i] = 0.5 * g.coordinate(i, 0) * g.coordinate(i, 0);
    Hamiltonian h(g, 1, {1.0});
    h.set_scalar_potential(v);
    const auto a = normalize(gaussian_1d(g, std::sqrt(0.5)));
    const auto b = evolve_step(a, h, 0.001);
    CHECK(continuity_residual(a, b, velocity_field(a, h)) < 1e-8);
  }
  SUBCASE("free Gaussian convergence and corrupted field") {
    const Grid g = line_grid(512, -32.0, 32.0);
    const double t0 = 1.0;
    const auto mid = SpinorWaveFunction::from_function(
        g, [&](std::span<const double> q) { return spreading_gaussian(q[0], t0, 1.0, 1.0); }, t0);
    const Hamiltonian h(g, 1, {1.0});
    auto residual = [&](double dt, double scale) {
      auto v = velocity_field(mid, roles);
      for (double& x : v.components[0]) x *= scale;
      return continuity_residual(evolve_step(mid, h, -dt / 2.0), evolve_step(mid, h, dt / 2.0), v);
    };
    const double r1 = residual(0.1, 1.0), r2 = residual(0.05, 1.0);
    CAPTURE(r1);
    CAPTURE(r2);
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(residual(0.1, 2.0) > 10.0 * r1);
  }
}

TEST_CASE("nonlocality probe") {
  const Grid g({{128, -16.0, 16.0}, {128, -16.0, 16.0}});
  const auto roles = uniform_roles(g, 1.0);
  auto phi = [](double x, double p) { return testing::gaussian_amplitude(x, 1.5, 0.0, p); };
  auto chi = [](double y, double y0) { return testing::gaussian_amplitude(y, 1.5, y0); };

  const auto product = normalize(SpinorWaveFunction::from_function(
      g, [&](std::span<const double> q) { return phi(q[0], 1.0) * chi(q[1], -5.0); }));
  const auto [pa, pb] = nonlocality_probe(product, roles, 0.3, -5.0, -3.5);
  CHECK(std::abs(pa - pb) < 1e-10);

  const cplx rel = std::polar(1.0, std::numbers::pi / 3.0);
  const auto entangled = normalize(SpinorWaveFunction::from_function(g, [&](std::span<const double> q) {
    return phi(q[0], 1.0) * chi(q[1], -5.0) + rel * phi(q[0], -1.0) * chi(q[1], 5.0);
  }));
  const auto [ea, eb] = nonlocality_probe(entangled, roles, 0.3, -5.0, 5.0);
  CHECK(std::abs(ea - eb) > 0.1);
  const auto [sa, sb] = nonlocality_probe(entangled, roles, 0.3, 5.0, -5.0);
  CHECK(sa == eb);
  CHECK(sb == ea);

  const Grid g1 = line_grid(16, 0.0, 1.0);
  CHECK_THROWS_AS(nonlocality_probe(normalize(gaussian_1d(g1, 0.1, 0.5)), roles_1d(), 0.5, 0.0, 0.0),
                  InvalidArgument);
  const auto dark = normalize(SpinorWaveFunction::from_function(g, [&](std::span<const double> q) {
    return phi(q[0], 0.0) * chi(q[1], -5.0);
  }));
  CHECK_THROWS_AS(nonlocality_probe(dark, roles, 0.0, -5.0, 14.0), MaskedPoint);
}

TEST_CASE("first crossing times") {
  TrajectoryHistory hist;
  hist.dims = 1;
  const double p = 2.0, x0 = -3.0, threshold = 1.0, dt = 0.1;
  for (int f = 0; f <= 40; ++f) {
    hist.times.push_back(f * dt);
    hist.frames.push_back({x0 + p * f * dt, -9.0});
  }
  const auto crossing = first_crossing_times(hist, 0, threshold, 100.0);
  REQUIRE(crossing[0].has_value());
  CHECK(std::abs(*crossing[0] - (threshold - x0) / p) < 1e-12);
  CHECK_FALSE(crossing[1].has_value());

  // Spreading ensemble: trajectories beyond 3 sigma at the end are exactly
  // those that crossed, and their fraction matches the final mass there.
  const Grid g = line_grid(1024, -32.0, 32.0);
  const auto psi0 = normalize(gaussian_1d(g, 1.0));
  const std::size_t m = 4000;
  GuidedEnsemble ens(psi0, HamiltonianSchedule(Hamiltonian(g, 1, {1.0})),
                     sample_density(density(psi0), m, 17), 0.02, std::numeric_limits<double>::infinity());
  TrajectoryHistory h;
  h.record(ens.trajectories());
  ens.run_until(4.0, [&](const GuidedEnsemble& e) { h.record(e.trajectories()); });
  const auto times = first_crossing_times(h, 0, 3.0, g.axis(0).length());
  std::size_t crossed = 0, beyond = 0;
  for (std::size_t i = 0; i < m; ++i) {
    crossed += times[i].has_value() && h.coordinate(0, i, 0) < 3.0;
    beyond += ens.trajectories().positions[i] >= 3.0 && h.coordinate(0, i, 0) < 3.0;
  }
  CHECK(crossed == beyond);
  const Interval tail[] = {{3.0, 31.9}};
  const double mass = region_probability(density(ens.state()), tail);
  const double frac = static_cast<double>(beyond) / m;
  CHECK(std::abs(frac - mass) < 4.0 * std::sqrt(mass * (1.0 - mass) / m) + 0.01);
  CHECK(ordering_preserved(h, 0));

  std::ostringstream csv;
  hist.write_csv(csv);
  CHECK(csv.str().rfind("trajectory_id,time,x0\n0,0,-3\n", 0) == 0);
}
