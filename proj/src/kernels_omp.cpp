#include "kernels_impl.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bohm::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {

void transform_axis(std::span<cplx> data, const Grid& grid, std::size_t axis,
                    bool inverse) {
  const auto lay = detail::line_layout(data.size(), grid, axis);
  const Fft& fft = Fft::cached(lay.n);
  const auto lines = static_cast<std::ptrdiff_t>(lay.slabs * lay.per_slab);
#pragma omp parallel
  {
    std::vector<cplx> buffer;
#pragma omp for schedule(static)
    for (std::ptrdiff_t line = 0; line < lines; ++line) {
      detail::transform_line(data, lay, static_cast<std::size_t>(line), fft,
                             inverse, buffer);
    }
  }
}

template <class T>
static T blocked(std::span<const T> values) {
  const auto nb = static_cast<std::ptrdiff_t>(detail::block_count(values.size()));
  std::vector<T> partial(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    partial[static_cast<std::size_t>(b)] =
        detail::sum_block(values, static_cast<std::size_t>(b));
  }
  T total{};
  for (const T& p : partial) total += p;
  return total;
}

double blocked_sum(std::span<const double> values) { return blocked(values); }
cplx blocked_sum(std::span<const cplx> values) { return blocked(values); }

Rk4Stats advance_rk4(std::span<double> positions, const VelocityField& v0,
                     const VelocityField& v1, double h) {
  const std::size_t d = v0.grid.rank();
  const auto m = static_cast<std::ptrdiff_t>(positions.size() / d);
  std::uint64_t capped = 0;
#pragma omp parallel for schedule(static) reduction(+ : capped)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto u = static_cast<std::size_t>(i);
    capped += detail::rk4_one(positions.subspan(u * d, d), v0, v1, h);
  }
  return Rk4Stats{capped};
}

std::vector<std::uint64_t> bin_counts(std::span<const double> positions,
                                      const Grid& grid,
                                      std::span<const std::size_t> bins) {
  const auto lay = detail::bin_layout(grid, bins);
  const std::size_t d = grid.rank();
  const auto m = static_cast<std::ptrdiff_t>(positions.size() / d);
  std::vector<std::uint64_t> counts(lay.total, 0);
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(lay.total, 0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      const auto u = static_cast<std::size_t>(i);
      ++local[detail::bin_of(positions.subspan(u * d, d), grid, lay)];
    }
#pragma omp critical
    for (std::size_t b = 0; b < lay.total; ++b) counts[b] += local[b];
  }
  return counts;
}

void sample_cells(std::span<const double> cdf, const Grid& grid,
                  std::uint64_t seed, std::uint64_t stream_offset,
                  std::span<double> positions) {
  const std::size_t d = grid.rank();
  const auto m = static_cast<std::ptrdiff_t>(positions.size() / d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto u = static_cast<std::size_t>(i);
    detail::sample_one(cdf, grid, seed, stream_offset + u, positions.subspan(u * d, d));
  }
}

}  // namespace omp
}  // namespace bohm::kernels
