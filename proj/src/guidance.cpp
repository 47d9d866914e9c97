#include "bohm/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "bohm/errors.hpp"
#include "bohm/io.hpp"
#include "bohm/kernels.hpp"

namespace bohm {

namespace {

// Spectral derivative of a real field, returned as a real field.
std::vector<double> real_derivative(std::span<const double> f, const Grid& g, std::size_t axis) {
  std::vector<cplx> buf(f.begin(), f.end());
  kernels::omp::transform_axis(buf, g, axis, false);
  const Axis& ax = g.axis(axis);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] *= cplx(0.0, ax.wavenumber(g.index_along(i, axis), true));
  }
  kernels::omp::transform_axis(buf, g, axis, true);
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = buf[i].real();
  return out;
}

VelocityField compute_velocity(const SpinorWaveFunction& psi, std::span<const double> masses,
                               double hbar, const PointerCoupling* coupling, double speed_cap) {
  const Grid& g = psi.grid();
  const std::size_t total = g.total_points();
  const std::size_t ns = psi.spin_count();
  const DensityField rho = density(psi);
  const double rho_max = *std::max_element(rho.values.begin(), rho.values.end());
  const double threshold = kNodeRelativeEpsilon * rho_max;

  VelocityField v;
  v.grid = g;
  v.time = psi.time();
  v.speed_cap = speed_cap;
  v.node_mask.resize(total);
  for (std::size_t c = 0; c < total; ++c) v.node_mask[c] = rho.values[c] < threshold ? 1 : 0;

  // current_a = sum_alpha (Re psi d_a Im psi - Im psi d_a Re psi); the real
  // and imaginary parts are differentiated separately so a real
  // wavefunction gives exactly zero current.
  std::vector<std::vector<double>> current(g.rank(), std::vector<double>(total, 0.0));
  std::vector<double> re(total), im(total);
  for (std::size_t alpha = 0; alpha < ns; ++alpha) {
    const auto comp = psi.component(alpha);
    for (std::size_t c = 0; c < total; ++c) {
      re[c] = comp[c].real();
      im[c] = comp[c].imag();
    }
    const bool has_imag = std::any_of(im.begin(), im.end(), [](double x) { return x != 0.0; });
    const bool has_real = std::any_of(re.begin(), re.end(), [](double x) { return x != 0.0; });
    for (std::size_t a = 0; a < g.rank(); ++a) {
      if (has_imag) {
        const auto dim = real_derivative(im, g, a);
        for (std::size_t c = 0; c < total; ++c) current[a][c] += re[c] * dim[c];
      }
      if (has_real && has_imag) {
        const auto dre = real_derivative(re, g, a);
        for (std::size_t c = 0; c < total; ++c) current[a][c] -= im[c] * dre[c];
      }
    }
  }

  v.components.assign(g.rank(), std::vector<double>(total, 0.0));
  for (std::size_t a = 0; a < g.rank(); ++a) {
    const double scale = hbar / masses[a];
    const bool pointer = coupling != nullptr && coupling->strength != 0.0 &&
                         coupling->pointer_axis == a;
    const auto n = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < n; ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      const double r = v.node_mask[c] ? rho.values[c] + threshold : rho.values[c];
      double val = scale * current[a][c];
      if (pointer) {
        for (std::size_t alpha = 0; alpha < ns; ++alpha) {
          val += coupling->strength * coupling->eigenvalues[alpha * total + c] *
                 std::norm(psi.component(alpha)[c]);
        }
      }
      v.components[a][c] = r > 0.0 ? val / r : 0.0;
    }
  }
  return v;
}

}  // namespace

VelocityField velocity_field(const SpinorWaveFunction& psi, const Hamiltonian& h,
                             double speed_cap) {
  require_same_grid(psi.grid(), h.grid());
  const PointerCoupling* cp = h.coupling() ? &*h.coupling() : nullptr;
  return compute_velocity(psi, h.masses(), h.hbar(), cp, speed_cap);
}

VelocityField velocity_field(const SpinorWaveFunction& psi, std::span<const AxisRole> roles,
                             double hbar, double speed_cap) {
  const auto masses = masses_from_roles(psi.grid(), roles);
  return compute_velocity(psi, masses, hbar, nullptr, speed_cap);
}

double continuity_residual(const SpinorWaveFunction& psi_a, const SpinorWaveFunction& psi_b,
                           const VelocityField& v) {
  require_same_grid(psi_a.grid(), psi_b.grid());
  require_same_grid(psi_a.grid(), v.grid);
  const double dt = psi_b.time() - psi_a.time();
  if (!(dt != 0.0)) throw InvalidArgument("snapshots must be at different times");
  const Grid& g = psi_a.grid();
  const std::size_t total = g.total_points();
  const auto ra = density(psi_a).values;
  const auto rb = density(psi_b).values;
  std::vector<double> residual(total);
  for (std::size_t c = 0; c < total; ++c) residual[c] = (rb[c] - ra[c]) / dt;
  std::vector<double> flux(total);
  for (std::size_t a = 0; a < g.rank(); ++a) {
    for (std::size_t c = 0; c < total; ++c) flux[c] = 0.5 * (ra[c] + rb[c]) * v.components[a][c];
    const auto div = real_derivative(flux, g, a);
    for (std::size_t c = 0; c < total; ++c) residual[c] += div[c];
  }
  for (double& r : residual) r *= r;
  return std::sqrt(kernels::omp::blocked_sum(residual) * g.cell_volume());
}

void TrajectoryHistory::record(const TrajectorySet& traj) {
  if (frames.empty()) dims = traj.dims;
  times.push_back(traj.time);
  frames.push_back(traj.positions);
}

void TrajectoryHistory::write_csv(std::ostream& out) const {
  out << "trajectory_id,time";
  for (std::size_t a = 0; a < dims; ++a) out << ",x" << a;
  out << '\n';
  for (std::size_t i = 0; i < trajectory_count(); ++i) {
    for (std::size_t f = 0; f < frames.size(); ++f) {
      out << i << ',' << format_double(times[f]);
      for (std::size_t a = 0; a < dims; ++a) out << ',' << format_double(coordinate(f, i, a));
      out << '\n';
    }
  }
}

TrajectorySet advance_trajectories(TrajectorySet traj, const VelocityField& v0,
                                   const VelocityField& v1, double h) {
  require_same_grid(v0.grid, v1.grid);
  if (traj.dims != v0.grid.rank()) throw GridMismatch("trajectory dimension differs from grid rank");
  const auto stats = kernels::omp::advance_rk4(traj.positions, v0, v1, h);
  traj.capped_evaluations += stats.capped_evaluations;
  traj.time += h;
  return traj;
}

TrajectorySet advance_trajectories(TrajectorySet traj, const SpinorWaveFunction& psi_t,
                                   const SpinorWaveFunction& psi_next,
                                   std::span<const AxisRole> roles, double hbar) {
  const auto v0 = velocity_field(psi_t, roles, hbar);
  const auto v1 = velocity_field(psi_next, roles, hbar);
  const double h = psi_next.time() - psi_t.time();
  return advance_trajectories(std::move(traj), v0, v1, h);
}

std::pair<double, double> nonlocality_probe(const SpinorWaveFunction& psi,
                                            std::span<const AxisRole> roles, double x1,
                                            double x2_a, double x2_b, double hbar) {
  if (psi.grid().rank() != 2) throw InvalidArgument("nonlocality probe needs a two-axis grid");
  const auto v = velocity_field(psi, roles, hbar);
  auto probe = [&](double x2) {
    const std::array<double, 2> q{x1, x2};
    const auto s = interpolate_velocity(v, q);
    if (s.capped) {
      throw MaskedPoint("probe point (" + std::to_string(x1) + ", " + std::to_string(x2) +
                        ") touches a wavefunction node");
    }
    return s.v[0];
  };
  return {probe(x2_a), probe(x2_b)};
}

std::vector<std::optional<double>> first_crossing_times(const TrajectoryHistory& history,
                                                        std::size_t axis, double threshold,
                                                        double axis_length) {
  const std::size_t m = history.trajectory_count();
  std::vector<std::optional<double>> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t f = 1; f < history.frames.size(); ++f) {
      const double x0 = history.coordinate(f - 1, i, axis);
      const double x1 = history.coordinate(f, i, axis);
      if (std::abs(x1 - x0) > 0.5 * axis_length) continue;
      const double s0 = x0 - threshold;
      const double s1 = x1 - threshold;
      if (s0 == 0.0 || (s0 < 0.0) == (s1 < 0.0)) continue;
      const double w = s0 / (s0 - s1);
      out[i] = history.times[f - 1] + w * (history.times[f] - history.times[f - 1]);
      break;
    }
  }
  return out;
}

bool ordering_preserved(const TrajectoryHistory& history, std::size_t axis) {
  const std::size_t m = history.trajectory_count();
  if (history.frames.empty() || m < 2) return true;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return history.coordinate(0, a, axis) < history.coordinate(0, b, axis);
  });
  for (std::size_t f = 0; f < history.frames.size(); ++f) {
    for (std::size_t k = 1; k < m; ++k) {
      if (!(history.coordinate(f, order[k - 1], axis) < history.coordinate(f, order[k], axis))) {
        return false;
      }
    }
  }
  return true;
}

GuidedEnsemble::GuidedEnsemble(SpinorWaveFunction psi, HamiltonianSchedule schedule,
                               TrajectorySet traj, double dt, double speed_cap)
    : prop_(std::move(schedule), dt), psi_(std::move(psi)), traj_(std::move(traj)),
      speed_cap_(speed_cap), initial_norm_(norm_squared(psi_)) {
  if (traj_.dims != psi_.grid().rank()) throw GridMismatch("trajectory dimension differs from grid rank");
  traj_.time = psi_.time();
}

void GuidedEnsemble::enter_stage(std::size_t stage) {
  if (stage_ && *stage_ == stage) return;
  if (stage_) {
    const double e = energy_expectation(psi_, prop_.schedule().stage(*stage_));
    const double scale = std::max(std::abs(stage_energy_), 1e-300);
    energy_drift_ = std::max(energy_drift_, std::abs(e - stage_energy_) / scale);
  }
  stage_ = stage;
  const Hamiltonian& h = prop_.schedule().stage(stage);
  stage_energy_ = energy_expectation(psi_, h);
  v_now_ = velocity_field(psi_, h, speed_cap_);
}

void GuidedEnsemble::step(double t_stop) {
  const std::size_t stage = prop_.schedule().stage_index_at(psi_.time());
  enter_stage(stage);
  const Hamiltonian& h = prop_.schedule().stage(stage);
  const double dt = prop_.step(psi_, t_stop);
  VelocityField v_next = velocity_field(psi_, h, speed_cap_);
  const auto stats = kernels::omp::advance_rk4(traj_.positions, v_now_, v_next, dt);
  traj_.capped_evaluations += stats.capped_evaluations;
  traj_.time = psi_.time();
  v_now_ = std::move(v_next);
}

void GuidedEnsemble::run_until(double t_stop,
                               const std::function<void(const GuidedEnsemble&)>& on_step) {
  while (psi_.time() < t_stop) {
    step(t_stop);
    if (on_step) on_step(*this);
  }
}

ConservationReport GuidedEnsemble::conservation() const {
  ConservationReport r;
  r.norm_drift = std::abs(norm_squared(psi_) - initial_norm_);
  r.energy_drift = energy_drift_;
  if (stage_) {
    const double e = energy_expectation(psi_, prop_.schedule().stage(*stage_));
    const double scale = std::max(std::abs(stage_energy_), 1e-300);
    r.energy_drift = std::max(r.energy_drift, std::abs(e - stage_energy_) / scale);
  }
  return r;
}

}  // namespace bohm
