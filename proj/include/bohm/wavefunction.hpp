#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bohm/grid.hpp"

namespace bohm {

using cplx = std::complex<double>;

/// Complex amplitudes Psi_alpha(q) over a grid, component-major
/// (all cells of spin 0, then all cells of spin 1, ...).
class SpinorWaveFunction {
 public:
  SpinorWaveFunction() = default;
  SpinorWaveFunction(Grid grid, std::size_t n_spin, double time = 0.0);
  SpinorWaveFunction(Grid grid, std::size_t n_spin, std::vector<cplx> amplitudes,
                     double time = 0.0);

  /// Fills a spinless wavefunction from f(q) where q has one entry per axis.
  static SpinorWaveFunction from_function(
      Grid grid, const std::function<cplx(std::span<const double>)>& f,
      double time = 0.0);

  const Grid& grid() const { return grid_; }
  std::size_t spin_count() const { return n_spin_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  std::span<cplx> amplitudes() { return amplitudes_; }
  std::span<const cplx> amplitudes() const { return amplitudes_; }
  std::span<cplx> component(std::size_t alpha);
  std::span<const cplx> component(std::size_t alpha) const;

 private:
  Grid grid_;
  std::size_t n_spin_ = 1;
  double time_ = 0.0;
  std::vector<cplx> amplitudes_;
};

/// Non-negative density over grid cells.
struct DensityField {
  Grid grid;
  std::vector<double> values;
  bool normalized = false;

  /// Sum of values times the cell volume.
  double integral() const;
};

/// Closed interval on one axis.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

double norm_squared(const SpinorWaveFunction& psi);

/// Rescales to unit norm; throws ZeroNorm if the norm is below 1e-300.
SpinorWaveFunction normalize(SpinorWaveFunction psi);

/// rho = sum_alpha |Psi_alpha|^2 per cell.
DensityField density(const SpinorWaveFunction& psi);

/// Integrates out every axis not in keep_axes. Kept axes keep their order.
DensityField marginal(const DensityField& rho, std::span<const std::size_t> keep_axes);

/// Probability mass in a box region (one interval per axis). Each cell is
/// [x_i - dx/2, x_i + dx/2] on the periodic axis and contributes its overlap
/// fraction.
double region_probability(const DensityField& rho, std::span<const Interval> region);

/// The whole domain of a grid as a region.
std::vector<Interval> full_region(const Grid& grid);

/// <a|b> = sum conj(a) b dq over all spin components.
cplx inner_product(const SpinorWaveFunction& a, const SpinorWaveFunction& b);

bool all_finite(std::span<const cplx> values);

}  // namespace bohm
