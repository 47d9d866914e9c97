#include "bohm/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "bohm/errors.hpp"
#include "bohm/io.hpp"
#include "bohm/kernels.hpp"
#include "bohm/rng.hpp"

namespace bohm {

namespace {

// Stream index reserved for non-trajectory draws (mode phases).
constexpr std::uint64_t kAuxStream = std::uint64_t{1} << 62;

void require_normalized(const DensityField& rho) {
  for (double v : rho.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UnnormalizedDensity("density has a negative or non-finite value");
  }
  const double total = rho.integral();
  if (std::abs(total - 1.0) > 1e-9) {
    throw UnnormalizedDensity("density integrates to " + format_double(total) + ", not 1");
  }
}

std::vector<double> fractions_from_counts(const std::vector<std::uint64_t>& counts, std::size_t m) {
  std::vector<double> f(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / static_cast<double>(m);
  return f;
}

}  // namespace

CoarseGraining::CoarseGraining(const Grid& grid, std::vector<std::size_t> bins)
    : grid_(grid), bins_(std::move(bins)) {
  if (bins_.size() != grid_.rank()) throw InvalidArgument("coarse graining needs one bin count per axis");
  for (std::size_t a = 0; a < bins_.size(); ++a) {
    if (bins_[a] < 2 || grid_.axis(a).points % bins_[a] != 0) {
      throw InvalidArgument("bin count " + std::to_string(bins_[a]) + " on axis " + std::to_string(a) +
                            " must be >= 2 and divide " + std::to_string(grid_.axis(a).points));
    }
  }
}

CoarseGraining CoarseGraining::uniform(const Grid& grid, std::size_t bins_per_axis) {
  return CoarseGraining(grid, std::vector<std::size_t>(grid.rank(), bins_per_axis));
}

std::size_t CoarseGraining::cell_count() const {
  std::size_t n = 1;
  for (std::size_t b : bins_) n *= b;
  return n;
}

double CoarseGraining::cell_volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < bins_.size(); ++a) v *= grid_.axis(a).length() / static_cast<double>(bins_[a]);
  return v;
}

TrajectorySet sample_density(const DensityField& rho, std::size_t count, std::uint64_t seed,
                             std::uint64_t stream_offset) {
  if (count == 0) throw InvalidArgument("ensemble size must be at least 1");
  require_normalized(rho);
  std::vector<double> cdf(rho.values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc += rho.values[i];
    cdf[i] = acc;
  }
  TrajectorySet t;
  t.dims = rho.grid.rank();
  t.positions.resize(count * t.dims);
  t.seed = seed;
  t.stream_offset = stream_offset;
  kernels::omp::sample_cells(cdf, rho.grid, seed, stream_offset, t.positions);
  return t;
}

std::vector<double> coarse_masses(const DensityField& rho, const CoarseGraining& cg) {
  require_same_grid(rho.grid, cg.grid());
  std::vector<double> masses(cg.cell_count(), 0.0);
  const Grid& g = rho.grid;
  std::vector<std::size_t> per_bin(g.rank());
  for (std::size_t a = 0; a < g.rank(); ++a) per_bin[a] = g.axis(a).points / cg.bins()[a];
  for (std::size_t cell = 0; cell < g.total_points(); ++cell) {
    std::size_t b = 0;
    for (std::size_t a = 0; a < g.rank(); ++a) b = b * cg.bins()[a] + g.index_along(cell, a) / per_bin[a];
    masses[b] += rho.values[cell];
  }
  for (double& m : masses) m *= g.cell_volume();
  return masses;
}

std::vector<double> empirical_fractions(const TrajectorySet& traj, const CoarseGraining& cg) {
  if (traj.dims != cg.grid().rank()) throw GridMismatch("trajectory dimension differs from grid rank");
  if (traj.size() == 0) throw InvalidArgument("empty trajectory set");
  return fractions_from_counts(kernels::omp::bin_counts(traj.positions, cg.grid(), cg.bins()), traj.size());
}

double total_variation(std::span<const double> empirical, std::span<const double> exact) {
  if (empirical.size() != exact.size()) throw InvalidArgument("histogram sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) s += std::abs(empirical[i] - exact[i]);
  return 0.5 * s;
}

double total_variation(const TrajectorySet& traj, const DensityField& rho, const CoarseGraining& cg) {
  require_normalized(rho);
  return total_variation(empirical_fractions(traj, cg), coarse_masses(rho, cg));
}

double h_function(std::span<const double> empirical, std::span<const double> exact) {
  if (empirical.size() != exact.size()) throw InvalidArgument("histogram sizes differ");
  double h = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (empirical[i] == 0.0) continue;
    if (exact[i] <= 0.0) throw SupportViolation("trajectories occupy coarse cell " + std::to_string(i) + " where |Psi|^2 vanishes");
    h += empirical[i] * std::log(empirical[i] / exact[i]);
  }
  return h;
}

double h_function(const TrajectorySet& traj, const DensityField& rho, const CoarseGraining& cg) {
  require_normalized(rho);
  return h_function(empirical_fractions(traj, cg), coarse_masses(rho, cg));
}

double iid_tv_expectation(std::span<const double> masses, std::size_t count) {
  double s = 0.0;
  for (double p : masses) s += std::sqrt(std::max(p * (1.0 - p), 0.0));
  return s / std::sqrt(2.0 * std::numbers::pi * static_cast<double>(count));
}

double resampled_tv_baseline(const DensityField& rho, const CoarseGraining& cg, std::size_t count,
                             std::uint64_t seed, std::size_t repeats) {
  if (repeats == 0) throw InvalidArgument("baseline needs at least one repeat");
  const auto exact = coarse_masses(rho, cg);
  double s = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto sample = sample_density(rho, count, seed, (r + 1) * count);
    s += total_variation(empirical_fractions(sample, cg), exact);
  }
  return s / static_cast<double>(repeats);
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("slope needs distinct x values");
  return sxy / sxx;
}

void HFunctionSeries::write_csv(std::ostream& out) const {
  out << "time,H,M,seed\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << format_double(times[i]) << ',' << format_double(values[i]) << ',' << ensemble_size << ','
        << seed << '\n';
  }
}

SpinorWaveFunction relaxation_wavefunction(const RelaxationConfig& cfg) {
  if (cfg.max_mode < 1) throw InvalidArgument("max_mode must be at least 1");
  const double half = 0.5 * cfg.length;
  const Grid g({{cfg.grid_points, -half, half}, {cfg.grid_points, -half, half}});
  const double k0 = 2.0 * std::numbers::pi / cfg.length;
  auto gen = make_stream(cfg.seed, kAuxStream);
  std::vector<std::pair<std::array<int, 2>, double>> modes;
  for (int i = -cfg.max_mode; i <= cfg.max_mode; ++i) {
    for (int j = -cfg.max_mode; j <= cfg.max_mode; ++j) {
      if (i == 0 || j == 0) continue;
      modes.push_back({{i, j}, 2.0 * std::numbers::pi * uniform01(gen)});
    }
  }
  SpinorWaveFunction psi(g, 1);
  auto amp = psi.amplitudes();
  for (std::size_t c = 0; c < g.total_points(); ++c) {
    const double x = g.coordinate(c, 0), y = g.coordinate(c, 1);
    cplx s = 0.0;
    for (const auto& [k, phase] : modes) s += std::polar(1.0, k0 * (k[0] * x + k[1] * y) + phase);
    amp[c] = s;
  }
  return normalize(std::move(psi));
}

RelaxationResult relaxation_experiment(const RelaxationConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(cfg.duration > 0.0)) throw InvalidArgument("duration must be positive");
  if (!(cfg.record_interval > 0.0)) throw InvalidArgument("record_interval must be positive");
  if (!(cfg.patch_fraction > 0.0 && cfg.patch_fraction <= 1.0)) {
    throw InvalidArgument("patch_fraction must lie in (0, 1]");
  }
  auto psi = relaxation_wavefunction(cfg);
  const Grid& g = psi.grid();
  const CoarseGraining cg = CoarseGraining::uniform(g, cfg.bins);

  DensityField start = density(psi);
  if (!cfg.equilibrium_start) {
    const double edge = 0.5 * cfg.patch_fraction * cfg.length;
    double total = 0.0;
    for (std::size_t c = 0; c < g.total_points(); ++c) {
      const bool inside = std::abs(g.coordinate(c, 0)) < edge && std::abs(g.coordinate(c, 1)) < edge;
      start.values[c] = inside ? 1.0 : 0.0;
      total += start.values[c];
    }
    if (total == 0.0) throw InvalidArgument("patch_fraction leaves no grid cell in the patch");
    for (double& v : start.values) v /= total * g.cell_volume();
  }
  TrajectorySet traj = sample_density(start, cfg.ensemble_size, cfg.seed);

  Hamiltonian h(g, 1, {cfg.mass, cfg.mass}, cfg.hbar);
  const double cap = 10.0 * g.diameter() / cfg.duration;
  GuidedEnsemble ens(psi, HamiltonianSchedule(h), std::move(traj), cfg.dt, cap);

  RelaxationResult r;
  r.mode_count = static_cast<std::size_t>(4 * cfg.max_mode * cfg.max_mode);
  r.series.ensemble_size = cfg.ensemble_size;
  r.series.seed = cfg.seed;
  r.series.bins = {cfg.bins, cfg.bins};
  auto record = [&] {
    r.series.times.push_back(ens.time());
    r.series.values.push_back(h_function(ens.trajectories(), density(ens.state()), cg));
  };
  record();
  const auto n_records = static_cast<std::size_t>(std::llround(cfg.duration / cfg.record_interval));
  for (std::size_t k = 1; k <= n_records; ++k) {
    const double t = std::min(cfg.duration, static_cast<double>(k) * cfg.record_interval);
    ens.run_until(t);
    record();
  }
  if (ens.time() < cfg.duration) {
    ens.run_until(cfg.duration);
    record();
  }
  r.conservation = ens.conservation();
  r.capped_evaluations = ens.trajectories().capped_evaluations;
  return r;
}

}  // namespace bohm
