#include "bohm/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "bohm/errors.hpp"
#include "bohm/kernels.hpp"

namespace bohm {

namespace {

constexpr double kHermitianTolerance = 1e-12;

std::vector<double> nyquist_zeroed_wavenumbers(const Axis& ax) {
  std::vector<double> k(ax.points);
  for (std::size_t j = 0; j < ax.points; ++j) k[j] = ax.wavenumber(j, true);
  return k;
}

}  // namespace

// ---------------------------------------------------------------- Hamiltonian

Hamiltonian::Hamiltonian(Grid grid, std::size_t n_spin, std::vector<double> masses,
                         double hbar)
    : grid_(std::move(grid)), n_spin_(n_spin), masses_(std::move(masses)), hbar_(hbar) {
  if (n_spin_ == 0) throw InvalidArgument("spin component count must be >= 1");
  if (masses_.size() != grid_.rank()) {
    throw InvalidArgument("one mass per grid axis required");
  }
  for (double m : masses_) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("masses must be positive");
  }
  if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) throw InvalidArgument("hbar must be positive");
}

Hamiltonian& Hamiltonian::set_potential(std::vector<cplx> matrix_field) {
  const std::size_t block = n_spin_ * n_spin_;
  if (matrix_field.size() != block * grid_.total_points()) {
    throw InvalidArgument("potential field has the wrong size");
  }
  if (!all_finite(matrix_field)) throw InvalidArgument("potential values must be finite");
  bool diagonal = true;
  for (std::size_t c = 0; c < grid_.total_points(); ++c) {
    const cplx* m = &matrix_field[c * block];
    for (std::size_t a = 0; a < n_spin_; ++a) {
      for (std::size_t b = 0; b < n_spin_; ++b) {
        const cplx vab = m[a * n_spin_ + b];
        const cplx vba = m[b * n_spin_ + a];
        if (std::abs(vab - std::conj(vba)) > kHermitianTolerance) {
          throw InvalidArgument("potential is not Hermitian at cell " + std::to_string(c));
        }
        if (a != b && vab != cplx{}) diagonal = false;
      }
    }
  }
  potential_ = std::move(matrix_field);
  diagonal_ = diagonal;
  return *this;
}

Hamiltonian& Hamiltonian::set_scalar_potential(std::span<const double> v) {
  if (v.size() != grid_.total_points()) throw InvalidArgument("potential field has the wrong size");
  std::vector<std::vector<double>> per_spin(n_spin_, std::vector<double>(v.begin(), v.end()));
  return set_diagonal_potential(per_spin);
}

Hamiltonian& Hamiltonian::set_diagonal_potential(
    const std::vector<std::vector<double>>& per_spin) {
  if (per_spin.size() != n_spin_) throw InvalidArgument("one potential per spin component required");
  const std::size_t total = grid_.total_points();
  std::vector<cplx> field(n_spin_ * n_spin_ * total);
  for (std::size_t a = 0; a < n_spin_; ++a) {
    if (per_spin[a].size() != total) throw InvalidArgument("potential field has the wrong size");
    for (std::size_t c = 0; c < total; ++c) {
      field[c * n_spin_ * n_spin_ + a * n_spin_ + a] = per_spin[a][c];
    }
  }
  return set_potential(std::move(field));
}

Hamiltonian& Hamiltonian::set_coupling(PointerCoupling coupling) {
  if (coupling.pointer_axis >= grid_.rank()) throw InvalidArgument("pointer axis outside grid");
  if (coupling.eigenvalues.size() != n_spin_ * grid_.total_points()) {
    throw InvalidArgument("coupling eigenvalue field has the wrong size");
  }
  if (!std::isfinite(coupling.strength)) throw InvalidArgument("coupling strength must be finite");
  const std::size_t total = grid_.total_points();
  const std::size_t stride = grid_.stride(coupling.pointer_axis);
  for (std::size_t a = 0; a < n_spin_; ++a) {
    for (std::size_t c = 0; c < total; ++c) {
      const double k = coupling.eigenvalues[a * total + c];
      if (!std::isfinite(k)) throw InvalidArgument("coupling eigenvalues must be finite");
      const std::size_t base = c - grid_.index_along(c, coupling.pointer_axis) * stride;
      if (k != coupling.eigenvalues[a * total + base]) {
        throw InvalidArgument("coupling eigenvalues must not depend on the pointer coordinate");
      }
    }
  }
  coupling_ = std::move(coupling);
  return *this;
}

double Hamiltonian::max_abs_potential() const {
  double m = 0.0;
  for (const cplx& v : potential_) m = std::max(m, std::abs(v));
  return m;
}

// -------------------------------------------------------- HamiltonianSchedule

HamiltonianSchedule::HamiltonianSchedule(Hamiltonian h) {
  stages_.push_back(std::move(h));
  starts_.push_back(-std::numeric_limits<double>::infinity());
}

void HamiltonianSchedule::add_stage(double start_time, Hamiltonian h) {
  if (!(start_time > starts_.back())) {
    throw InvalidArgument("schedule stages must have increasing start times");
  }
  require_same_grid(h.grid(), stages_.front().grid());
  if (h.spin_count() != stages_.front().spin_count()) {
    throw InvalidArgument("schedule stages must share the spin component count");
  }
  stages_.push_back(std::move(h));
  starts_.push_back(start_time);
}

std::size_t HamiltonianSchedule::stage_index_at(double t) const {
  std::size_t k = 0;
  while (k + 1 < starts_.size() && starts_[k + 1] <= t) ++k;
  return k;
}

double HamiltonianSchedule::next_switch_after(double t) const {
  for (double s : starts_) {
    if (s > t) return s;
  }
  return std::numeric_limits<double>::infinity();
}

// --------------------------------------------------------------- SplitStepper

SplitStepper::SplitStepper(const Hamiltonian& h, double dt)
    : grid_(h.grid()), dt_(dt), n_spin_(h.spin_count()) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be nonzero and finite");
  const std::size_t total = grid_.total_points();
  const double hbar = h.hbar();

  if (h.has_potential()) {
    const auto v = h.potential();
    const double theta = 0.5 * dt / hbar;
    if (h.potential_is_diagonal()) {
      potential_phase_.resize(n_spin_ * total);
      for (std::size_t a = 0; a < n_spin_; ++a) {
        for (std::size_t c = 0; c < total; ++c) {
          const double vaa = v[c * n_spin_ * n_spin_ + a * n_spin_ + a].real();
          potential_phase_[a * total + c] = std::polar(1.0, -vaa * theta);
        }
      }
    } else {
      using Mat = Eigen::MatrixXcd;
      potential_blocks_.resize(n_spin_ * n_spin_ * total);
      Mat m(n_spin_, n_spin_);
      for (std::size_t c = 0; c < total; ++c) {
        for (std::size_t a = 0; a < n_spin_; ++a) {
          for (std::size_t b = 0; b < n_spin_; ++b) {
            m(a, b) = v[c * n_spin_ * n_spin_ + a * n_spin_ + b];
          }
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        Eigen::VectorXcd phases(n_spin_);
        for (std::size_t a = 0; a < n_spin_; ++a) {
          phases(a) = std::polar(1.0, -es.eigenvalues()(a) * theta);
        }
        const Mat u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
        for (std::size_t a = 0; a < n_spin_; ++a) {
          for (std::size_t b = 0; b < n_spin_; ++b) {
            potential_blocks_[c * n_spin_ * n_spin_ + a * n_spin_ + b] = u(a, b);
          }
        }
      }
    }
  }

  std::vector<std::vector<double>> axis_energy(grid_.rank());
  for (std::size_t a = 0; a < grid_.rank(); ++a) {
    const Axis& ax = grid_.axis(a);
    axis_energy[a].resize(ax.points);
    for (std::size_t j = 0; j < ax.points; ++j) {
      const double k = ax.wavenumber(j, false);
      axis_energy[a][j] = hbar * hbar * k * k / (2.0 * h.masses()[a]);
    }
  }
  kinetic_phase_.resize(total);
  for (std::size_t c = 0; c < total; ++c) {
    double e = 0.0;
    for (std::size_t a = 0; a < grid_.rank(); ++a) e += axis_energy[a][grid_.index_along(c, a)];
    kinetic_phase_[c] = std::polar(1.0, -e * dt / hbar);
  }

  if (const auto& cp = h.coupling(); cp && cp->strength != 0.0) {
    pointer_axis_ = cp->pointer_axis;
    const auto k = nyquist_zeroed_wavenumbers(grid_.axis(cp->pointer_axis));
    coupling_phase_.resize(n_spin_ * total);
    for (std::size_t a = 0; a < n_spin_; ++a) {
      for (std::size_t c = 0; c < total; ++c) {
        const double kp = k[grid_.index_along(c, cp->pointer_axis)];
        // exp(-i g K hbar k (dt/2) / hbar)
        coupling_phase_[a * total + c] =
            std::polar(1.0, -cp->strength * cp->eigenvalues[a * total + c] * kp * 0.5 * dt);
      }
    }
  }
}

void SplitStepper::apply_potential(SpinorWaveFunction& psi) const {
  const std::size_t total = grid_.total_points();
  auto amps = psi.amplitudes();
  if (!potential_phase_.empty()) {
    const auto n = static_cast<std::ptrdiff_t>(amps.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      amps[static_cast<std::size_t>(i)] *= potential_phase_[static_cast<std::size_t>(i)];
    }
  } else if (!potential_blocks_.empty()) {
    const auto n = static_cast<std::ptrdiff_t>(total);
    const std::size_t ns = n_spin_;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < n; ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      std::array<cplx, 8> in{};
      std::vector<cplx> big;
      cplx* src = in.data();
      if (ns > in.size()) {
        big.resize(ns);
        src = big.data();
      }
      for (std::size_t a = 0; a < ns; ++a) src[a] = amps[a * total + c];
      const cplx* u = &potential_blocks_[c * ns * ns];
      for (std::size_t a = 0; a < ns; ++a) {
        cplx acc{};
        for (std::size_t b = 0; b < ns; ++b) acc += u[a * ns + b] * src[b];
        amps[a * total + c] = acc;
      }
    }
  }
}

void SplitStepper::apply_coupling(SpinorWaveFunction& psi) const {
  auto amps = psi.amplitudes();
  const auto n = static_cast<std::ptrdiff_t>(amps.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    amps[static_cast<std::size_t>(i)] *= coupling_phase_[static_cast<std::size_t>(i)];
  }
}

void SplitStepper::step(SpinorWaveFunction& psi) const {
  require_same_grid(psi.grid(), grid_);
  if (psi.spin_count() != n_spin_) throw GridMismatch("spin component count differs from Hamiltonian");
  auto amps = psi.amplitudes();
  const std::size_t total = grid_.total_points();

  apply_potential(psi);
  if (pointer_axis_) {
    kernels::omp::transform_axis(amps, grid_, *pointer_axis_, false);
    apply_coupling(psi);
  }
  for (std::size_t a = 0; a < grid_.rank(); ++a) {
    if (pointer_axis_ && a == *pointer_axis_) continue;
    kernels::omp::transform_axis(amps, grid_, a, false);
  }
  {
    const auto n = static_cast<std::ptrdiff_t>(amps.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      amps[u] *= kinetic_phase_[u % total];
    }
  }
  for (std::size_t a = 0; a < grid_.rank(); ++a) {
    if (pointer_axis_ && a == *pointer_axis_) continue;
    kernels::omp::transform_axis(amps, grid_, a, true);
  }
  if (pointer_axis_) {
    apply_coupling(psi);
    kernels::omp::transform_axis(amps, grid_, *pointer_axis_, true);
  }
  apply_potential(psi);

  if (!all_finite(amps)) {
    throw NonFiniteAmplitude("amplitudes became non-finite; time step too large for the potential");
  }
  psi.set_time(psi.time() + dt_);
}

SpinorWaveFunction evolve_step(SpinorWaveFunction psi, const Hamiltonian& h, double dt) {
  require_same_grid(psi.grid(), h.grid());
  SplitStepper(h, dt).step(psi);
  return psi;
}

// ----------------------------------------------------------------- Propagator

Propagator::Propagator(HamiltonianSchedule schedule, double dt)
    : schedule_(std::move(schedule)), dt_(dt) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidArgument("dt must be positive");
}

const SplitStepper& Propagator::stepper(std::size_t stage, double h) {
  auto& slot = cache_[{stage, h}];
  if (!slot) slot = std::make_unique<SplitStepper>(schedule_.stage(stage), h);
  return *slot;
}

double Propagator::step(SpinorWaveFunction& psi, double t_stop) {
  const double t = psi.time();
  const double limit = std::min(t_stop, schedule_.next_switch_after(t));
  const double remaining = limit - t;
  if (!(remaining > 0.0)) throw InvalidArgument("no time left to step");
  const std::size_t stage = schedule_.stage_index_at(t);
  if (remaining <= dt_ * (1.0 + 1e-9)) {
    if (remaining == dt_) {
      stepper(stage, dt_).step(psi);
    } else {
      SplitStepper(schedule_.stage(stage), remaining).step(psi);
    }
    psi.set_time(limit);
    return remaining;
  }
  stepper(stage, dt_).step(psi);
  psi.set_time(t + dt_);
  return dt_;
}

std::vector<SpinorWaveFunction> evolve_to(SpinorWaveFunction psi,
                                          const HamiltonianSchedule& schedule,
                                          double t_final, double dt,
                                          std::span<const double> snapshot_times) {
  const double t0 = psi.time();
  if (t_final < t0) throw InvalidArgument("t_final precedes the state time");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
    throw InvalidArgument("snapshot times must be sorted");
  }
  std::vector<double> targets(snapshot_times.begin(), snapshot_times.end());
  if (targets.empty()) targets.push_back(t_final);
  for (double s : targets) {
    if (s < t0 || s > t_final) throw InvalidArgument("snapshot time outside the evolution interval");
  }
  std::vector<SpinorWaveFunction> out;
  if (t_final == t0) {
    for (std::size_t i = 0; i < targets.size(); ++i) out.push_back(psi);
    return out;
  }
  Propagator prop(schedule, dt);
  for (double target : targets) {
    while (psi.time() < target) prop.step(psi, target);
    out.push_back(psi);
  }
  return out;
}

// --------------------------------------------------------------- diagnostics

std::vector<cplx> spectral_derivative(const SpinorWaveFunction& psi, std::size_t axis) {
  const Grid& g = psi.grid();
  std::vector<cplx> d(psi.amplitudes().begin(), psi.amplitudes().end());
  kernels::omp::transform_axis(d, g, axis, false);
  const auto k = nyquist_zeroed_wavenumbers(g.axis(axis));
  const std::size_t total = g.total_points();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] *= cplx(0.0, k[g.index_along(i % total, axis)]);
  }
  kernels::omp::transform_axis(d, g, axis, true);
  return d;
}

double energy_expectation(const SpinorWaveFunction& psi, const Hamiltonian& h) {
  const Grid& g = psi.grid();
  require_same_grid(g, h.grid());
  if (psi.spin_count() != h.spin_count()) throw GridMismatch("spin component count differs from Hamiltonian");
  const std::size_t total = g.total_points();
  const std::size_t ns = psi.spin_count();
  const double hbar = h.hbar();
  const double dq = g.cell_volume();

  std::vector<cplx> hat(psi.amplitudes().begin(), psi.amplitudes().end());
  for (std::size_t a = 0; a < g.rank(); ++a) kernels::omp::transform_axis(hat, g, a, false);
  std::vector<double> terms(hat.size());
  for (std::size_t i = 0; i < hat.size(); ++i) {
    const std::size_t c = i % total;
    double e = 0.0;
    for (std::size_t a = 0; a < g.rank(); ++a) {
      const double k = g.axis(a).wavenumber(g.index_along(c, a), false);
      e += hbar * hbar * k * k / (2.0 * h.masses()[a]);
    }
    terms[i] = std::norm(hat[i]) * e;
  }
  double energy = kernels::omp::blocked_sum(terms) * dq / static_cast<double>(total);

  if (h.has_potential()) {
    const auto v = h.potential();
    const auto amps = psi.amplitudes();
    std::vector<double> pot(total);
    for (std::size_t c = 0; c < total; ++c) {
      cplx acc{};
      for (std::size_t a = 0; a < ns; ++a) {
        for (std::size_t b = 0; b < ns; ++b) {
          acc += std::conj(amps[a * total + c]) * v[c * ns * ns + a * ns + b] * amps[b * total + c];
        }
      }
      pot[c] = acc.real();
    }
    energy += kernels::omp::blocked_sum(pot) * dq;
  }

  if (const auto& cp = h.coupling(); cp && cp->strength != 0.0) {
    const auto d = spectral_derivative(psi, cp->pointer_axis);
    const auto amps = psi.amplitudes();
    std::vector<double> cpl(amps.size());
    for (std::size_t i = 0; i < amps.size(); ++i) {
      // Re(conj(psi) K (-i hbar d psi))
      cpl[i] = cp->eigenvalues[i] * (std::conj(amps[i]) * cplx(0.0, -hbar) * d[i]).real();
    }
    energy += cp->strength * kernels::omp::blocked_sum(cpl) * dq;
  }
  return energy;
}

double default_time_step(const Hamiltonian& h) {
  double dt = std::numeric_limits<double>::infinity();
  const double vmax = h.max_abs_potential();
  if (vmax > 0.0) dt = std::min(dt, 0.05 * h.hbar() / vmax);
  double kmax_ptr = 0.0;
  for (std::size_t a = 0; a < h.grid().rank(); ++a) {
    const double k = std::numbers::pi / h.grid().axis(a).spacing();
    dt = std::min(dt, 0.5 * 2.0 * h.masses()[a] / (h.hbar() * k * k));
    if (h.coupling() && h.coupling()->pointer_axis == a) kmax_ptr = k;
  }
  if (const auto& cp = h.coupling(); cp && cp->strength != 0.0) {
    double kmax = 0.0;
    for (double e : cp->eigenvalues) kmax = std::max(kmax, std::abs(e));
    const double rate = std::abs(cp->strength) * kmax * kmax_ptr;
    if (rate > 0.0) dt = std::min(dt, 0.5 / rate);
  }
  return dt;
}

}  // namespace bohm
