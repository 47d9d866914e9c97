#include "bohm/wavefunction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bohm/errors.hpp"
#include "bohm/kernels.hpp"

namespace bohm {

SpinorWaveFunction::SpinorWaveFunction(Grid grid, std::size_t n_spin, double time)
    : grid_(std::move(grid)), n_spin_(n_spin), time_(time) {
  if (n_spin_ == 0) throw InvalidArgument("spin component count must be >= 1");
  amplitudes_.assign(n_spin_ * grid_.total_points(), cplx{});
}

SpinorWaveFunction::SpinorWaveFunction(Grid grid, std::size_t n_spin,
                                       std::vector<cplx> amplitudes, double time)
    : grid_(std::move(grid)), n_spin_(n_spin), time_(time),
      amplitudes_(std::move(amplitudes)) {
  if (n_spin_ == 0) throw InvalidArgument("spin component count must be >= 1");
  if (amplitudes_.size() != n_spin_ * grid_.total_points()) {
    throw InvalidArgument("amplitude array has " + std::to_string(amplitudes_.size()) +
                          " entries, expected " +
                          std::to_string(n_spin_ * grid_.total_points()));
  }
  if (!all_finite(amplitudes_)) throw NonFiniteAmplitude("non-finite input amplitude");
}

SpinorWaveFunction SpinorWaveFunction::from_function(
    Grid grid, const std::function<cplx(std::span<const double>)>& f, double time) {
  SpinorWaveFunction psi(grid, 1, time);
  std::array<double, Grid::kMaxRank> q{};
  for (std::size_t c = 0; c < grid.total_points(); ++c) {
    for (std::size_t a = 0; a < grid.rank(); ++a) q[a] = grid.coordinate(c, a);
    psi.amplitudes_[c] = f(std::span<const double>(q.data(), grid.rank()));
  }
  if (!all_finite(psi.amplitudes_)) throw NonFiniteAmplitude("non-finite input amplitude");
  return psi;
}

std::span<cplx> SpinorWaveFunction::component(std::size_t alpha) {
  return std::span<cplx>(amplitudes_).subspan(alpha * grid_.total_points(),
                                              grid_.total_points());
}

std::span<const cplx> SpinorWaveFunction::component(std::size_t alpha) const {
  return std::span<const cplx>(amplitudes_)
      .subspan(alpha * grid_.total_points(), grid_.total_points());
}

bool all_finite(std::span<const cplx> values) {
  return std::all_of(values.begin(), values.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

double DensityField::integral() const {
  return kernels::omp::blocked_sum(values) * grid.cell_volume();
}

double norm_squared(const SpinorWaveFunction& psi) {
  return density(psi).integral();
}

SpinorWaveFunction normalize(SpinorWaveFunction psi) {
  const double n2 = norm_squared(psi);
  const double n = std::sqrt(n2);
  if (!(n >= 1e-300)) throw ZeroNorm("wavefunction norm " + std::to_string(n));
  const double scale = 1.0 / n;
  for (cplx& z : psi.amplitudes()) z *= scale;
  return psi;
}

DensityField density(const SpinorWaveFunction& psi) {
  const Grid& g = psi.grid();
  const auto total = static_cast<std::ptrdiff_t>(g.total_points());
  DensityField rho{g, std::vector<double>(g.total_points(), 0.0), false};
  const std::size_t ns = psi.spin_count();
  const auto amps = psi.amplitudes();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < total; ++c) {
    double s = 0.0;
    for (std::size_t alpha = 0; alpha < ns; ++alpha) {
      s += std::norm(amps[alpha * static_cast<std::size_t>(total) +
                          static_cast<std::size_t>(c)]);
    }
    rho.values[static_cast<std::size_t>(c)] = s;
  }
  rho.normalized = std::abs(rho.integral() - 1.0) <= 1e-9;
  return rho;
}

DensityField marginal(const DensityField& rho, std::span<const std::size_t> keep_axes) {
  if (keep_axes.empty()) throw EmptyAxisSet("marginal needs at least one kept axis");
  const Grid& g = rho.grid;
  std::vector<bool> keep(g.rank(), false);
  for (std::size_t a : keep_axes) {
    if (a >= g.rank()) throw InvalidArgument("kept axis " + std::to_string(a) + " not in grid");
    if (keep[a]) throw InvalidArgument("kept axis " + std::to_string(a) + " listed twice");
    keep[a] = true;
  }
  std::vector<std::size_t> order(keep_axes.begin(), keep_axes.end());
  std::vector<Axis> axes;
  double dropped_volume = 1.0;
  for (std::size_t a : order) axes.push_back(g.axis(a));
  for (std::size_t a = 0; a < g.rank(); ++a) {
    if (!keep[a]) dropped_volume *= g.axis(a).spacing();
  }
  DensityField out{Grid(std::move(axes)), {}, rho.normalized};
  out.values.assign(out.grid.total_points(), 0.0);
  for (std::size_t c = 0; c < g.total_points(); ++c) {
    std::size_t target = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      target += g.index_along(c, order[k]) * out.grid.stride(k);
    }
    out.values[target] += rho.values[c];
  }
  if (dropped_volume != 1.0) {
    for (double& v : out.values) v *= dropped_volume;
  }
  return out;
}

namespace {

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Fraction of each periodic cell on axis `ax` that lies inside [lo, hi].
std::vector<double> cell_weights(const Axis& ax, const Interval& iv) {
  std::vector<double> w(ax.points);
  const double dx = ax.spacing();
  const double len = ax.length();
  for (std::size_t i = 0; i < ax.points; ++i) {
    const double c = ax.coordinate(i);
    const double l = c - 0.5 * dx;
    const double r = c + 0.5 * dx;
    const double o = overlap(l, r, iv.lower, iv.upper) +
                     overlap(l + len, r + len, iv.lower, iv.upper) +
                     overlap(l - len, r - len, iv.lower, iv.upper);
    w[i] = o / dx;
  }
  return w;
}

}  // namespace

double region_probability(const DensityField& rho, std::span<const Interval> region) {
  const Grid& g = rho.grid;
  if (region.size() != g.rank()) {
    throw RegionOutOfBounds("region has " + std::to_string(region.size()) +
                            " intervals for a rank-" + std::to_string(g.rank()) + " grid");
  }
  std::vector<std::vector<double>> weights;
  for (std::size_t a = 0; a < g.rank(); ++a) {
    const Axis& ax = g.axis(a);
    const Interval& iv = region[a];
    const double tol = 1e-12 * ax.length();
    if (!(iv.lower <= iv.upper) || iv.lower < ax.lower - tol || iv.upper > ax.upper + tol) {
      throw RegionOutOfBounds("interval on axis " + std::to_string(a) +
                              " is outside the grid bounds");
    }
    weights.push_back(cell_weights(ax, iv));
  }
  std::vector<double> contrib(g.total_points());
  for (std::size_t c = 0; c < g.total_points(); ++c) {
    double w = 1.0;
    for (std::size_t a = 0; a < g.rank(); ++a) w *= weights[a][g.index_along(c, a)];
    contrib[c] = w * rho.values[c];
  }
  return kernels::omp::blocked_sum(contrib) * g.cell_volume();
}

std::vector<Interval> full_region(const Grid& grid) {
  std::vector<Interval> r;
  for (const Axis& ax : grid.axes()) r.push_back({ax.lower, ax.upper});
  return r;
}

cplx inner_product(const SpinorWaveFunction& a, const SpinorWaveFunction& b) {
  require_same_grid(a.grid(), b.grid());
  if (a.spin_count() != b.spin_count()) throw GridMismatch("spin component counts differ");
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  std::vector<cplx> prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = std::conj(x[i]) * y[i];
  return kernels::omp::blocked_sum(prod) * a.grid().cell_volume();
}

}  // namespace bohm
