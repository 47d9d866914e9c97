#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bohm/equilibrium.hpp"
#include "bohm/guidance.hpp"
#include "bohm/propagator.hpp"

namespace bohm {

/// Observable with a non-degenerate discrete spectrum. Eigenspaces are
/// either disjoint intervals of one system axis or single spin components.
struct DiscreteObservable {
  enum class Kind { kRegion, kSpin };

  Kind kind = Kind::kRegion;
  std::vector<double> eigenvalues;
  /// kRegion only: one interval of the system axis per eigenvalue.
  std::vector<Interval> regions;
  std::size_t system_axis = 0;

  static DiscreteObservable region(std::vector<double> eigenvalues, std::vector<Interval> regions,
                                   std::size_t system_axis = 0);
  /// Eigenvalue i belongs to spin component i.
  static DiscreteObservable spin(std::vector<double> eigenvalues);

  std::size_t size() const { return eigenvalues.size(); }
};

/// Pointer coupling g K p_pointer switched on during [t_on, t_off), with one
/// pointer interval per eigenvalue read at readout_time.
struct MeasurementSetup {
  DiscreteObservable observable;
  /// Pointer axis appended to the system grid by compose_initial.
  Axis pointer;
  double pointer_mass = 1.0;
  double pointer_center = 0.0;
  /// Amplitude width w: A0(y) ~ exp(-(y - y0)^2 / (2 w^2)).
  double pointer_width = 1.0;
  double coupling = 0.0;
  double t_on = 0.0;
  double t_off = 1.0;
  double readout_time = 1.0;
  std::vector<Interval> outcome_regions;
  std::vector<double> system_masses;
  double hbar = 1.0;

  /// Throws ValidationFailure naming the first violated invariant.
  void validate() const;
  /// g (t_off - t_on) times the smallest eigenvalue gap.
  double pointer_separation() const;
};

/// Index of the pointer axis in the composed grid.
inline std::size_t pointer_axis_index(const Grid& system_grid) { return system_grid.rank(); }

/// Product of the system state and the pointer packet, normalized.
SpinorWaveFunction compose_initial(const SpinorWaveFunction& system_psi, const MeasurementSetup& setup);

/// Free evolution outside the window, plus the coupling inside it.
HamiltonianSchedule measurement_hamiltonian(const MeasurementSetup& setup, const Grid& composed,
                                            std::size_t n_spin);

/// P_k psi for each eigenvalue k.
std::vector<SpinorWaveFunction> branches(const SpinorWaveFunction& psi, const DiscreteObservable& obs);
/// |c_k|^2 = ||P_k psi||^2.
std::vector<double> branch_masses(const SpinorWaveFunction& psi, const DiscreteObservable& obs);

/// Overlaps integral sqrt(rho_i rho_j) of the pointer marginals of the
/// branches; only branches with mass above 1e-12 are kept.
struct OverlapMatrix {
  std::vector<std::size_t> outcomes;
  std::vector<double> values;  // row-major, outcomes.size()^2

  std::size_t size() const { return outcomes.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  double max_off_diagonal() const;
  double trace() const;
};
OverlapMatrix overlap_matrix(const SpinorWaveFunction& psi, const DiscreteObservable& obs,
                             std::size_t pointer_axis);

struct OutcomeStatistics {
  std::vector<double> eigenvalues;
  std::vector<std::uint64_t> counts;
  std::vector<double> frequencies;
  std::vector<double> targets;
  std::uint64_t unassigned = 0;
  std::uint64_t total = 0;
  std::optional<OverlapMatrix> overlap;
};

/// Outcome index per trajectory, -1 when the pointer lies in no region.
std::vector<int> assign_outcomes(const TrajectorySet& traj, std::span<const Interval> regions,
                                 std::size_t pointer_axis);
/// Counts outcomes; throws TooManyUnassigned when more than 0.1% of the
/// trajectories fall outside every region.
OutcomeStatistics readout(const TrajectorySet& traj, std::span<const Interval> regions,
                          std::size_t pointer_axis, std::vector<double> targets);
OutcomeStatistics readout(const TrajectorySet& traj, const MeasurementSetup& setup,
                          std::vector<double> targets);

/// z_k = (freq_k - p_k) / sqrt(p_k (1 - p_k) / M).
std::vector<double> born_rule_report(const OutcomeStatistics& stats);

struct MeasurementRun {
  OutcomeStatistics stats;
  SpinorWaveFunction final_state;
  TrajectorySet initial;
  TrajectorySet final;
  ConservationReport conservation;
  double speed_cap = 0.0;
};

/// Samples M trajectories from |Psi0|^2, evolves state and ensemble to the
/// readout time and reads the pointer. The node speed cap defaults to
/// 10 x grid diameter / readout time times cap_scale.
MeasurementRun run_measurement(const MeasurementSetup& setup, const SpinorWaveFunction& system_psi,
                               std::size_t count, std::uint64_t seed, double dt,
                               double cap_scale = 1.0);

struct SternGerlachConfig {
  std::size_t points = 1024;
  double lower = -40.0;
  double upper = 40.0;
  double mass = 1.0;
  double hbar = 1.0;
  /// Density standard deviation of the initial packet (centred at 0).
  double sigma = 1.0;
  cplx alpha{std::sqrt(0.3), 0.0};
  cplx beta{std::sqrt(0.7), 0.0};
  /// V = diag(-F z, +F z) during the window: spin up is pushed to +z.
  double field = 2.0;
  double t_on = 0.0;
  double t_off = 2.0;
  double readout_time = 4.0;
  double dt = 0.005;
  std::size_t ensemble_size = 10000;
  std::uint64_t seed = 1;
  /// Record every n-th step in the history (the final step is always kept).
  std::size_t record_stride = 10;
  /// Trajectories to keep in the history (0 keeps all).
  std::size_t history_trajectories = 0;
};

struct SternGerlachResult {
  OutcomeStatistics stats;  // outcome 0 = up (z >= 0), 1 = down
  std::vector<int> outcomes;
  TrajectorySet initial;
  TrajectorySet final;
  TrajectoryHistory history;
  bool no_crossing = true;
  ConservationReport conservation;
  double speed_cap = 0.0;
};

/// Spin-1/2 packet in a spin-dependent linear potential. If `initial` is
/// given it replaces the sampled ensemble.
SternGerlachResult stern_gerlach_experiment(const SternGerlachConfig& cfg,
                                            std::optional<TrajectorySet> initial = std::nullopt);

}  // namespace bohm
