#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bohm/guidance.hpp"
#include "bohm/wavefunction.hpp"

namespace bohm {

/// Coarse cells formed by grouping consecutive grid cells; bins[a] must be
/// at least 2 and divide the points on axis a.
class CoarseGraining {
 public:
  CoarseGraining(const Grid& grid, std::vector<std::size_t> bins);
  /// Same bin count on every axis.
  static CoarseGraining uniform(const Grid& grid, std::size_t bins_per_axis);

  const Grid& grid() const { return grid_; }
  std::span<const std::size_t> bins() const { return bins_; }
  std::size_t cell_count() const;
  double cell_volume() const;

 private:
  Grid grid_;
  std::vector<std::size_t> bins_;
};

/// Inverse-CDF sampling over flattened cells with uniform jitter inside the
/// cell. Trajectory i draws from RNG stream stream_offset + i.
TrajectorySet sample_density(const DensityField& rho, std::size_t count, std::uint64_t seed,
                             std::uint64_t stream_offset = 0);

/// |Psi|^2 mass of each coarse cell.
std::vector<double> coarse_masses(const DensityField& rho, const CoarseGraining& cg);
/// Fraction of trajectories in each coarse cell.
std::vector<double> empirical_fractions(const TrajectorySet& traj, const CoarseGraining& cg);

/// 1/2 sum |P - rho| over coarse cells.
double total_variation(std::span<const double> empirical, std::span<const double> exact);
double total_variation(const TrajectorySet& traj, const DensityField& rho, const CoarseGraining& cg);

/// sum P ln(P / rho) over coarse cells; cells with P = 0 contribute nothing.
double h_function(std::span<const double> empirical, std::span<const double> exact);
double h_function(const TrajectorySet& traj, const DensityField& rho, const CoarseGraining& cg);

/// Large-M expectation of the total variation of an i.i.d. sample:
/// sum sqrt(p (1 - p) / (2 pi M)).
double iid_tv_expectation(std::span<const double> masses, std::size_t count);
/// Mean total variation of `repeats` fresh samples of size `count` from rho.
double resampled_tv_baseline(const DensityField& rho, const CoarseGraining& cg, std::size_t count,
                             std::uint64_t seed, std::size_t repeats = 20);

/// Ordinary least-squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

struct HFunctionSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::size_t ensemble_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> bins;

  double slope() const { return least_squares_slope(times, values); }
  /// Columns time,H,M,seed.
  void write_csv(std::ostream& out) const;
};

/// Random-phase superposition of plane-wave modes on a periodic square with
/// an initial ensemble confined to a central patch.
struct RelaxationConfig {
  std::size_t grid_points = 64;
  double length = 6.283185307179586;
  /// Modes e^{i k.q} with every k component in {-max_mode..max_mode} \ {0},
  /// in units of 2 pi / length.
  int max_mode = 2;
  double mass = 1.0;
  double hbar = 1.0;
  std::size_t ensemble_size = 20000;
  std::uint64_t seed = 1;
  double duration = 20.0;
  double dt = 0.01;
  double record_interval = 0.5;
  std::size_t bins = 32;
  /// Side of the initial uniform patch as a fraction of the box side.
  double patch_fraction = 0.5;
  /// Sample the initial ensemble from |Psi|^2 instead of the patch.
  bool equilibrium_start = false;
};

struct RelaxationResult {
  HFunctionSeries series;
  ConservationReport conservation;
  std::uint64_t capped_evaluations = 0;
  std::size_t mode_count = 0;
};

/// The superposition used by relaxation_experiment, with phases drawn from
/// the config seed.
SpinorWaveFunction relaxation_wavefunction(const RelaxationConfig& cfg);
RelaxationResult relaxation_experiment(const RelaxationConfig& cfg);

}  // namespace bohm
