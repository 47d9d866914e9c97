#pragma once

// Data-parallel inner loops. Each kernel exists twice: a plain serial
// reference in kernels::serial and an OpenMP version in kernels::omp that
// must produce bitwise-identical results. tests/test_kernels.cpp checks the
// equality, bench/bench_kernels.cpp times both.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bohm/grid.hpp"
#include "bohm/velocity_field.hpp"

namespace bohm::kernels {

using cplx = std::complex<double>;

/// Block length for deterministic reductions.
inline constexpr std::size_t kSumBlock = 4096;

struct Rk4Stats {
  std::uint64_t capped_evaluations = 0;
};

namespace serial {

/// FFT of every line along `axis`, for each grid-sized slab in data.
void transform_axis(std::span<cplx> data, const Grid& grid, std::size_t axis,
                    bool inverse);
/// Fixed-block summation; the result does not depend on thread count.
double blocked_sum(std::span<const double> values);
cplx blocked_sum(std::span<const cplx> values);
/// One RK4 step of dX/dt = v(X, t) for every trajectory. Stage velocities
/// are linear in time between v0 (start of step) and v1 (end of step).
Rk4Stats advance_rk4(std::span<double> positions, const VelocityField& v0,
                     const VelocityField& v1, double h);
/// Coarse histogram of positions; bins[a] divides grid.axis(a).points.
std::vector<std::uint64_t> bin_counts(std::span<const double> positions,
                                      const Grid& grid,
                                      std::span<const std::size_t> bins);
/// Inverse-CDF draws over flattened cells with uniform in-cell jitter.
/// Trajectory i uses RNG stream (seed, stream_offset + i).
void sample_cells(std::span<const double> cdf, const Grid& grid,
                  std::uint64_t seed, std::uint64_t stream_offset,
                  std::span<double> positions);

}  // namespace serial

namespace omp {

void transform_axis(std::span<cplx> data, const Grid& grid, std::size_t axis,
                    bool inverse);
double blocked_sum(std::span<const double> values);
cplx blocked_sum(std::span<const cplx> values);
Rk4Stats advance_rk4(std::span<double> positions, const VelocityField& v0,
                     const VelocityField& v1, double h);
std::vector<std::uint64_t> bin_counts(std::span<const double> positions,
                                      const Grid& grid,
                                      std::span<const std::size_t> bins);
void sample_cells(std::span<const double> cdf, const Grid& grid,
                  std::uint64_t seed, std::uint64_t stream_offset,
                  std::span<double> positions);

}  // namespace omp

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace bohm::kernels
