#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bohm/wavefunction.hpp"

namespace bohm {

/// Term g * K (x) p_pointer with K diagonal in the system coordinates and
/// spin: K is given per spin component and cell and must not vary along the
/// pointer axis. In the mixed representation (position for every axis except
/// the pointer, wavenumber for the pointer) this term is diagonal.
struct PointerCoupling {
  std::size_t pointer_axis = 0;
  double strength = 0.0;
  std::vector<double> eigenvalues;  // n_spin * total_points
};

/// Time-independent H = sum_a p_a^2 / 2 m_a + V(q) [+ g K p_pointer].
/// V is an n_spin x n_spin Hermitian matrix per cell, stored row-major per cell.
class Hamiltonian {
 public:
  Hamiltonian(Grid grid, std::size_t n_spin, std::vector<double> masses,
              double hbar = 1.0);

  /// Full matrix field, n_spin*n_spin entries per cell. Checked Hermitian.
  Hamiltonian& set_potential(std::vector<cplx> matrix_field);
  /// Same scalar potential on every spin component.
  Hamiltonian& set_scalar_potential(std::span<const double> v);
  /// Diagonal potential, one field per spin component.
  Hamiltonian& set_diagonal_potential(const std::vector<std::vector<double>>& per_spin);
  Hamiltonian& set_coupling(PointerCoupling coupling);

  const Grid& grid() const { return grid_; }
  std::size_t spin_count() const { return n_spin_; }
  double hbar() const { return hbar_; }
  std::span<const double> masses() const { return masses_; }
  bool has_potential() const { return !potential_.empty(); }
  std::span<const cplx> potential() const { return potential_; }
  const std::optional<PointerCoupling>& coupling() const { return coupling_; }
  /// max over cells of the largest |V_ab|.
  double max_abs_potential() const;
  /// True when V has no off-diagonal spin entries.
  bool potential_is_diagonal() const { return diagonal_; }

 private:
  Grid grid_;
  std::size_t n_spin_;
  std::vector<double> masses_;
  double hbar_;
  std::vector<cplx> potential_;
  bool diagonal_ = true;
  std::optional<PointerCoupling> coupling_;
};

/// Piecewise-constant schedule: stage k applies from starts[k] until
/// starts[k+1]. The first stage applies from -infinity.
class HamiltonianSchedule {
 public:
  explicit HamiltonianSchedule(Hamiltonian h);
  void add_stage(double start_time, Hamiltonian h);

  std::size_t size() const { return stages_.size(); }
  const Hamiltonian& stage(std::size_t k) const { return stages_[k]; }
  double stage_start(std::size_t k) const { return starts_[k]; }
  /// Stage in force on [t, t + epsilon).
  std::size_t stage_index_at(double t) const;
  const Hamiltonian& at(double t) const { return stages_[stage_index_at(t)]; }
  /// Next switch time strictly after t, or +infinity.
  double next_switch_after(double t) const;

 private:
  std::vector<Hamiltonian> stages_;
  std::vector<double> starts_;
};

/// Symmetric (Strang) split-step stepper for a fixed Hamiltonian and dt:
/// V/2, C/2, T, C/2, V/2 where C is the pointer coupling. Precomputes all
/// phase factors; step() is then a pure function of the input state.
class SplitStepper {
 public:
  SplitStepper(const Hamiltonian& h, double dt);

  double dt() const { return dt_; }
  void step(SpinorWaveFunction& psi) const;

 private:
  void apply_potential(SpinorWaveFunction& psi) const;
  void apply_coupling(SpinorWaveFunction& psi) const;

  Grid grid_;
  double dt_;
  std::size_t n_spin_;
  // Diagonal V: one half-step phase per spin and cell (empty if V absent).
  std::vector<cplx> potential_phase_;
  // Non-diagonal V: n_spin*n_spin unitary block per cell.
  std::vector<cplx> potential_blocks_;
  std::vector<cplx> kinetic_phase_;  // one entry per k-space cell
  std::optional<std::size_t> pointer_axis_;
  std::vector<cplx> coupling_phase_;  // per spin and mixed-representation cell
};

/// One step of length dt (nonzero; negative runs backwards).
SpinorWaveFunction evolve_step(SpinorWaveFunction psi, const Hamiltonian& h, double dt);

/// Drives a state through a schedule with a nominal dt. Steps never straddle
/// a stage switch or a requested stop time; the last step before either is
/// shortened. Steppers are cached per (stage, step length).
class Propagator {
 public:
  Propagator(HamiltonianSchedule schedule, double dt);

  const HamiltonianSchedule& schedule() const { return schedule_; }
  double dt() const { return dt_; }
  /// Advances psi by one step without passing t_stop; returns the length.
  double step(SpinorWaveFunction& psi, double t_stop);
  /// Hamiltonian governing the step that starts at psi.time().
  const Hamiltonian& active(double t) const { return schedule_.at(t); }

 private:
  const SplitStepper& stepper(std::size_t stage, double h);

  HamiltonianSchedule schedule_;
  double dt_;
  std::map<std::pair<std::size_t, double>, std::unique_ptr<SplitStepper>> cache_;
};

/// Evolves to t_final and returns snapshots at each requested time (sorted,
/// within [psi.time, t_final]); an empty list means just the final state.
/// A zero-length interval yields the input unchanged.
std::vector<SpinorWaveFunction> evolve_to(SpinorWaveFunction psi,
                                          const HamiltonianSchedule& schedule,
                                          double t_final, double dt,
                                          std::span<const double> snapshot_times = {});

/// <psi|H|psi> with the kinetic part evaluated spectrally.
double energy_expectation(const SpinorWaveFunction& psi, const Hamiltonian& h);

/// Largest dt with max|V| dt / hbar <= 0.05, Nyquist kinetic phase <= 0.5 rad
/// and Nyquist coupling phase <= 0.5 rad.
double default_time_step(const Hamiltonian& h);

/// Spectral partial derivative along `axis` of each spin component.
std::vector<cplx> spectral_derivative(const SpinorWaveFunction& psi, std::size_t axis);

}  // namespace bohm
