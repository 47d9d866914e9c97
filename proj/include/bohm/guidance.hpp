#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bohm/propagator.hpp"
#include "bohm/velocity_field.hpp"
#include "bohm/wavefunction.hpp"

namespace bohm {

/// Cells with density below this fraction of the maximum density are nodes.
inline constexpr double kNodeRelativeEpsilon = 1e-12;

/// v_a = Re(Psi^dagger v_a Psi) / |Psi|^2 with v_a = p_a / m_a, plus g K on
/// the pointer axis when the Hamiltonian carries a pointer coupling.
VelocityField velocity_field(const SpinorWaveFunction& psi, const Hamiltonian& h,
                             double speed_cap = std::numeric_limits<double>::infinity());
VelocityField velocity_field(const SpinorWaveFunction& psi, std::span<const AxisRole> roles,
                             double hbar = 1.0,
                             double speed_cap = std::numeric_limits<double>::infinity());

/// Grid L2 norm of d rho/dt + div(rho v) using the centred difference of two
/// snapshots and rho at the midpoint (average of the two). `v` should be the
/// field at the midpoint time.
double continuity_residual(const SpinorWaveFunction& psi_a, const SpinorWaveFunction& psi_b,
                           const VelocityField& v);

/// M configuration points with their RNG provenance.
struct TrajectorySet {
  std::size_t dims = 1;
  std::vector<double> positions;  // M x dims, row-major
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_offset = 0;
  std::uint64_t capped_evaluations = 0;

  std::size_t size() const { return dims == 0 ? 0 : positions.size() / dims; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(positions).subspan(i * dims, dims);
  }
};

/// Recorded frames of a trajectory set.
struct TrajectoryHistory {
  std::size_t dims = 1;
  std::vector<double> times;
  std::vector<std::vector<double>> frames;

  void record(const TrajectorySet& traj);
  std::size_t trajectory_count() const { return frames.empty() ? 0 : frames.front().size() / dims; }
  double coordinate(std::size_t frame, std::size_t trajectory, std::size_t axis) const {
    return frames[frame][trajectory * dims + axis];
  }
  /// CSV with columns trajectory_id,time,x0,...; rows grouped by trajectory.
  void write_csv(std::ostream& out) const;
};

/// One RK4 step from v0 (start) to v1 (end); positions wrap periodically.
TrajectorySet advance_trajectories(TrajectorySet traj, const VelocityField& v0,
                                   const VelocityField& v1, double h);
/// Same, computing both fields from the bracketing snapshots.
TrajectorySet advance_trajectories(TrajectorySet traj, const SpinorWaveFunction& psi_t,
                                   const SpinorWaveFunction& psi_next,
                                   std::span<const AxisRole> roles, double hbar = 1.0);

/// Axis-0 velocity at (x1, x2_a) and (x1, x2_b) on a two-axis wavefunction.
std::pair<double, double> nonlocality_probe(const SpinorWaveFunction& psi,
                                            std::span<const AxisRole> roles, double x1,
                                            double x2_a, double x2_b, double hbar = 1.0);

/// Earliest time each trajectory crosses `threshold` on `axis`, linearly
/// interpolated between frames. Jumps longer than half the axis are treated
/// as periodic wraps, not crossings.
std::vector<std::optional<double>> first_crossing_times(const TrajectoryHistory& history,
                                                        std::size_t axis, double threshold,
                                                        double axis_length);

/// True when the ordering of trajectories along `axis` is the same in every
/// frame as in the first one.
bool ordering_preserved(const TrajectoryHistory& history, std::size_t axis);

struct ConservationReport {
  double norm_drift = 0.0;
  /// Largest relative energy change across any single schedule stage.
  double energy_drift = 0.0;
};

/// Wavefunction and trajectory ensemble advanced in lockstep: each
/// propagator step is followed by one RK4 step using the velocity fields of
/// the two bracketing snapshots.
class GuidedEnsemble {
 public:
  GuidedEnsemble(SpinorWaveFunction psi, HamiltonianSchedule schedule, TrajectorySet traj,
                 double dt, double speed_cap);

  const SpinorWaveFunction& state() const { return psi_; }
  const TrajectorySet& trajectories() const { return traj_; }
  TrajectorySet& trajectories() { return traj_; }
  double time() const { return psi_.time(); }
  const HamiltonianSchedule& schedule() const { return prop_.schedule(); }

  /// One step not passing t_stop.
  void step(double t_stop);
  /// Steps until t_stop, calling on_step after each step.
  void run_until(double t_stop, const std::function<void(const GuidedEnsemble&)>& on_step = {});
  ConservationReport conservation() const;

 private:
  void enter_stage(std::size_t stage);

  Propagator prop_;
  SpinorWaveFunction psi_;
  TrajectorySet traj_;
  double speed_cap_;
  double initial_norm_;
  std::optional<std::size_t> stage_;
  VelocityField v_now_;
  double stage_energy_ = 0.0;
  double energy_drift_ = 0.0;
};

}  // namespace bohm
