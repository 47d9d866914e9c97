#pragma once

// Per-item bodies shared by the serial and OpenMP kernel loops, so that both
// variants execute identical floating-point operations.

#include <algorithm>
#include <cmath>
#include <vector>

#include "bohm/fft.hpp"
#include "bohm/kernels.hpp"
#include "bohm/rng.hpp"

namespace bohm::kernels::detail {

struct LineLayout {
  std::size_t n = 0;        // points along the axis
  std::size_t stride = 0;   // distance between consecutive points
  std::size_t per_slab = 0; // lines per grid-sized slab
  std::size_t slabs = 0;
  std::size_t total = 0;    // grid points per slab

  std::size_t start(std::size_t line) const {
    const std::size_t slab = line / per_slab;
    const std::size_t l = line % per_slab;
    const std::size_t inner = l % stride;
    const std::size_t outer = l / stride;
    return slab * total + outer * n * stride + inner;
  }
};

inline LineLayout line_layout(std::size_t data_size, const Grid& grid,
                              std::size_t axis) {
  LineLayout lay;
  lay.n = grid.axis(axis).points;
  lay.stride = grid.stride(axis);
  lay.total = grid.total_points();
  lay.per_slab = lay.total / lay.n;
  lay.slabs = data_size / lay.total;
  return lay;
}

inline void transform_line(std::span<cplx> data, const LineLayout& lay,
                           std::size_t line, const Fft& fft, bool inverse,
                           std::vector<cplx>& buffer) {
  const std::size_t s = lay.start(line);
  if (lay.stride == 1) {
    auto view = data.subspan(s, lay.n);
    inverse ? fft.inverse(view) : fft.forward(view);
    return;
  }
  buffer.resize(lay.n);
  for (std::size_t i = 0; i < lay.n; ++i) buffer[i] = data[s + i * lay.stride];
  inverse ? fft.inverse(buffer) : fft.forward(buffer);
  for (std::size_t i = 0; i < lay.n; ++i) data[s + i * lay.stride] = buffer[i];
}

template <class T>
T sum_block(std::span<const T> values, std::size_t block) {
  const std::size_t b = block * kSumBlock;
  const std::size_t e = std::min(values.size(), b + kSumBlock);
  T acc{};
  for (std::size_t i = b; i < e; ++i) acc += values[i];
  return acc;
}

inline std::size_t block_count(std::size_t n) {
  return (n + kSumBlock - 1) / kSumBlock;
}

inline std::uint64_t rk4_one(std::span<double> x, const VelocityField& v0,
                             const VelocityField& v1, double h) {
  const std::size_t d = x.size();
  const Grid& grid = v0.grid;
  std::uint64_t capped = 0;
  std::array<double, Grid::kMaxRank> k1{}, k2{}, k3{}, k4{}, xs{};
  const std::span<const double> probe(xs.data(), d);

  auto mid = [&](std::array<double, Grid::kMaxRank>& k) {
    const VelocitySample a = interpolate_velocity(v0, probe);
    const VelocitySample b = interpolate_velocity(v1, probe);
    capped += a.capped + b.capped;
    for (std::size_t i = 0; i < d; ++i) k[i] = 0.5 * (a.v[i] + b.v[i]);
  };

  const VelocitySample s1 = interpolate_velocity(v0, x);
  capped += s1.capped;
  k1 = s1.v;
  for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * h * k1[i];
  mid(k2);
  for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * h * k2[i];
  mid(k3);
  for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + h * k3[i];
  const VelocitySample s4 = interpolate_velocity(v1, probe);
  capped += s4.capped;
  k4 = s4.v;
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = grid.wrap(i, x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
  }
  return capped;
}

struct BinLayout {
  std::array<std::size_t, Grid::kMaxRank> cells_per_bin{};
  std::array<std::size_t, Grid::kMaxRank> bin_stride{};
  std::size_t total = 1;
};

inline BinLayout bin_layout(const Grid& grid, std::span<const std::size_t> bins) {
  BinLayout lay;
  for (std::size_t a = grid.rank(); a-- > 0;) {
    lay.cells_per_bin[a] = grid.axis(a).points / bins[a];
    lay.bin_stride[a] = lay.total;
    lay.total *= bins[a];
  }
  return lay;
}

inline std::size_t bin_of(std::span<const double> x, const Grid& grid,
                          const BinLayout& lay) {
  std::size_t b = 0;
  for (std::size_t a = 0; a < grid.rank(); ++a) {
    b += (grid.cell_of(a, x[a]) / lay.cells_per_bin[a]) * lay.bin_stride[a];
  }
  return b;
}

inline void sample_one(std::span<const double> cdf, const Grid& grid,
                       std::uint64_t seed, std::uint64_t stream,
                       std::span<double> out) {
  auto gen = make_stream(seed, stream);
  const double u = uniform01(gen) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t cell = static_cast<std::size_t>(it - cdf.begin());
  if (cell >= cdf.size()) cell = cdf.size() - 1;
  for (std::size_t a = 0; a < grid.rank(); ++a) {
    const Axis& ax = grid.axis(a);
    const double jitter = (uniform01(gen) - 0.5) * ax.spacing();
    out[a] = grid.wrap(a, ax.coordinate(grid.index_along(cell, a)) + jitter);
  }
}

}  // namespace bohm::kernels::detail
