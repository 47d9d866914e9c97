#include "kernels_impl.hpp"

namespace bohm::kernels::serial {

void transform_axis(std::span<cplx> data, const Grid& grid, std::size_t axis,
                    bool inverse) {
  const auto lay = detail::line_layout(data.size(), grid, axis);
  const Fft& fft = Fft::cached(lay.n);
  std::vector<cplx> buffer;
  for (std::size_t line = 0; line < lay.slabs * lay.per_slab; ++line) {
    detail::transform_line(data, lay, line, fft, inverse, buffer);
  }
}

double blocked_sum(std::span<const double> values) {
  double total = 0.0;
  for (std::size_t b = 0; b < detail::block_count(values.size()); ++b) {
    total += detail::sum_block(values, b);
  }
  return total;
}

cplx blocked_sum(std::span<const cplx> values) {
  cplx total{};
  for (std::size_t b = 0; b < detail::block_count(values.size()); ++b) {
    total += detail::sum_block(values, b);
  }
  return total;
}

Rk4Stats advance_rk4(std::span<double> positions, const VelocityField& v0,
                     const VelocityField& v1, double h) {
  const std::size_t d = v0.grid.rank();
  Rk4Stats stats;
  for (std::size_t i = 0; i < positions.size() / d; ++i) {
    stats.capped_evaluations += detail::rk4_one(positions.subspan(i * d, d), v0, v1, h);
  }
  return stats;
}

std::vector<std::uint64_t> bin_counts(std::span<const double> positions,
                                      const Grid& grid,
                                      std::span<const std::size_t> bins) {
  const auto lay = detail::bin_layout(grid, bins);
  const std::size_t d = grid.rank();
  std::vector<std::uint64_t> counts(lay.total, 0);
  for (std::size_t i = 0; i < positions.size() / d; ++i) {
    ++counts[detail::bin_of(positions.subspan(i * d, d), grid, lay)];
  }
  return counts;
}

void sample_cells(std::span<const double> cdf, const Grid& grid,
                  std::uint64_t seed, std::uint64_t stream_offset,
                  std::span<double> positions) {
  const std::size_t d = grid.rank();
  for (std::size_t i = 0; i < positions.size() / d; ++i) {
    detail::sample_one(cdf, grid, seed, stream_offset + i, positions.subspan(i * d, d));
  }
}

}  // namespace bohm::kernels::serial
