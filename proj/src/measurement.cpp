#include "bohm/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bohm/errors.hpp"
#include "bohm/io.hpp"

namespace bohm {

namespace {

bool disjoint(std::span<const Interval> r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      if (r[i].lower < r[j].upper && r[j].lower < r[i].upper) return false;
    }
  }
  return true;
}

bool contains(const Interval& r, double x) { return x >= r.lower && x <= r.upper; }

void require_valid(const DiscreteObservable& obs) {
  if (obs.eigenvalues.empty()) throw ValidationFailure("observable.eigenvalues: at least one eigenvalue required");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = i + 1; j < obs.size(); ++j) {
      if (obs.eigenvalues[i] == obs.eigenvalues[j]) {
        throw ValidationFailure("observable.eigenvalues: degenerate eigenvalue " + format_double(obs.eigenvalues[i]));
      }
    }
  }
  if (obs.kind == DiscreteObservable::Kind::kRegion) {
    if (obs.regions.size() != obs.size()) {
      throw ValidationFailure("observable.regions: need one system region per eigenvalue");
    }
    for (const auto& r : obs.regions) {
      if (!(r.upper > r.lower)) throw ValidationFailure("observable.regions: empty interval");
    }
    if (!disjoint(obs.regions)) throw ValidationFailure("observable.regions: regions overlap");
  }
}

// Per-spin, per-cell eigenvalue of K (0 outside every region).
std::vector<double> observable_field(const DiscreteObservable& obs, const Grid& g, std::size_t n_spin) {
  std::vector<double> k(n_spin * g.total_points(), 0.0);
  if (obs.kind == DiscreteObservable::Kind::kSpin) {
    if (n_spin != obs.size()) throw GridMismatch("spin observable needs one eigenvalue per spin component");
    for (std::size_t a = 0; a < n_spin; ++a) {
      std::fill_n(k.begin() + static_cast<std::ptrdiff_t>(a * g.total_points()), g.total_points(), obs.eigenvalues[a]);
    }
    return k;
  }
  for (std::size_t c = 0; c < g.total_points(); ++c) {
    const double x = g.coordinate(c, obs.system_axis);
    for (std::size_t r = 0; r < obs.size(); ++r) {
      if (contains(obs.regions[r], x)) {
        for (std::size_t a = 0; a < n_spin; ++a) k[a * g.total_points() + c] = obs.eigenvalues[r];
        break;
      }
    }
  }
  return k;
}

}  // namespace

DiscreteObservable DiscreteObservable::region(std::vector<double> eigenvalues, std::vector<Interval> regions,
                                              std::size_t system_axis) {
  DiscreteObservable o;
  o.kind = Kind::kRegion;
  o.eigenvalues = std::move(eigenvalues);
  o.regions = std::move(regions);
  o.system_axis = system_axis;
  require_valid(o);
  return o;
}

DiscreteObservable DiscreteObservable::spin(std::vector<double> eigenvalues) {
  DiscreteObservable o;
  o.kind = Kind::kSpin;
  o.eigenvalues = std::move(eigenvalues);
  require_valid(o);
  return o;
}

double MeasurementSetup::pointer_separation() const {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < observable.size(); ++i) {
    for (std::size_t j = i + 1; j < observable.size(); ++j) {
      gap = std::min(gap, std::abs(observable.eigenvalues[i] - observable.eigenvalues[j]));
    }
  }
  return std::abs(coupling) * (t_off - t_on) * gap;
}

void MeasurementSetup::validate() const {
  require_valid(observable);
  if (!(pointer_width > 0.0)) throw ValidationFailure("pointer_width must be positive");
  if (!(pointer_mass > 0.0)) throw ValidationFailure("pointer_mass must be positive");
  if (!(hbar > 0.0)) throw ValidationFailure("hbar must be positive");
  for (double m : system_masses) {
    if (!(m > 0.0)) throw ValidationFailure("system masses must be positive");
  }
  if (!(t_on < t_off)) throw ValidationFailure("coupling window: t_on must be before t_off");
  if (!(t_off <= readout_time)) throw ValidationFailure("readout_time must not precede t_off");
  if (outcome_regions.size() != observable.size()) {
    throw ValidationFailure("outcome_regions: need one pointer region per eigenvalue");
  }
  if (!disjoint(outcome_regions)) throw ValidationFailure("outcome_regions: regions overlap");
  for (const auto& r : outcome_regions) {
    if (!(r.upper > r.lower) || r.lower < pointer.lower || r.upper > pointer.upper) {
      throw ValidationFailure("outcome_regions: interval empty or outside the pointer axis");
    }
  }
  if (observable.size() > 1) {
    const double sep = pointer_separation();
    if (!(sep > 6.0 * pointer_width)) {
      throw ValidationFailure("pointer separation check failed: coupling * window * eigenvalue gap = " +
                              format_double(sep) + " must exceed 6 * pointer_width = " +
                              format_double(6.0 * pointer_width) +
                              " so that pointer branches do not overlap");
    }
  }
}

SpinorWaveFunction compose_initial(const SpinorWaveFunction& system_psi, const MeasurementSetup& setup) {
  setup.validate();
  const Grid& sg = system_psi.grid();
  std::vector<Axis> axes(sg.axes().begin(), sg.axes().end());
  axes.push_back(setup.pointer);
  const Grid g(std::move(axes));  // throws GridCapExceeded
  const std::size_t n_spin = system_psi.spin_count();
  const std::size_t np = setup.pointer.points;

  std::vector<cplx> pointer(np);
  double norm = 0.0;
  for (std::size_t j = 0; j < np; ++j) {
    const double d = setup.pointer.coordinate(j) - setup.pointer_center;
    const double a = std::exp(-d * d / (2.0 * setup.pointer_width * setup.pointer_width));
    pointer[j] = a;
    norm += a * a * setup.pointer.spacing();
  }
  for (cplx& z : pointer) z /= std::sqrt(norm);

  const auto sys = normalize(system_psi);
  SpinorWaveFunction psi(g, n_spin, system_psi.time());
  for (std::size_t a = 0; a < n_spin; ++a) {
    auto src = sys.component(a);
    auto dst = psi.component(a);
    for (std::size_t c = 0; c < sg.total_points(); ++c) {
      for (std::size_t j = 0; j < np; ++j) dst[c * np + j] = src[c] * pointer[j];
    }
  }
  return psi;
}

HamiltonianSchedule measurement_hamiltonian(const MeasurementSetup& setup, const Grid& composed,
                                            std::size_t n_spin) {
  setup.validate();
  std::vector<double> masses = setup.system_masses;
  if (masses.size() + 1 != composed.rank()) {
    throw GridMismatch("need one system mass per system axis");
  }
  masses.push_back(setup.pointer_mass);
  const Hamiltonian free(composed, n_spin, masses, setup.hbar);
  Hamiltonian on = free;
  PointerCoupling c;
  c.pointer_axis = composed.rank() - 1;
  c.strength = setup.coupling;
  c.eigenvalues = observable_field(setup.observable, composed, n_spin);
  on.set_coupling(std::move(c));
  HamiltonianSchedule s(free);
  s.add_stage(setup.t_on, on);
  s.add_stage(setup.t_off, free);
  return s;
}

std::vector<SpinorWaveFunction> branches(const SpinorWaveFunction& psi, const DiscreteObservable& obs) {
  const Grid& g = psi.grid();
  const std::size_t n = g.total_points();
  std::vector<SpinorWaveFunction> out;
  if (obs.kind == DiscreteObservable::Kind::kSpin) {
    if (psi.spin_count() != obs.size()) throw GridMismatch("spin observable needs one eigenvalue per spin component");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      SpinorWaveFunction b(g, psi.spin_count(), psi.time());
      std::copy(psi.component(k).begin(), psi.component(k).end(), b.component(k).begin());
      out.push_back(std::move(b));
    }
    return out;
  }
  if (obs.system_axis >= g.rank()) throw GridMismatch("observable system axis outside the grid");
  const auto field = observable_field(obs, g, 1);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    SpinorWaveFunction b(g, psi.spin_count(), psi.time());
    for (std::size_t a = 0; a < psi.spin_count(); ++a) {
      auto src = psi.component(a);
      auto dst = b.component(a);
      for (std::size_t c = 0; c < n; ++c) {
        if (field[c] == obs.eigenvalues[k] && contains(obs.regions[k], g.coordinate(c, obs.system_axis))) {
          dst[c] = src[c];
        }
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<double> branch_masses(const SpinorWaveFunction& psi, const DiscreteObservable& obs) {
  std::vector<double> m;
  for (const auto& b : branches(psi, obs)) m.push_back(norm_squared(b));
  return m;
}

double OverlapMatrix::max_off_diagonal() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      if (i != j) m = std::max(m, (*this)(i, j));
    }
  }
  return m;
}

double OverlapMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < size(); ++i) t += (*this)(i, i);
  return t;
}

OverlapMatrix overlap_matrix(const SpinorWaveFunction& psi, const DiscreteObservable& obs,
                             std::size_t pointer_axis) {
  if (pointer_axis >= psi.grid().rank()) throw GridMismatch("pointer axis outside the grid");
  const std::size_t keep[] = {pointer_axis};
  const double dy = psi.grid().axis(pointer_axis).spacing();
  OverlapMatrix m;
  std::vector<std::vector<double>> marginals;
  for (std::size_t k = 0; auto& b : branches(psi, obs)) {
    auto rho = density(b);
    rho.normalized = false;
    auto mk = marginal(rho, keep);
    double mass = 0.0;
    for (double v : mk.values) mass += v * dy;
    if (mass > 1e-12) {
      m.outcomes.push_back(k);
      marginals.push_back(std::move(mk.values));
    }
    ++k;
  }
  const std::size_t n = marginals.size();
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t y = 0; y < marginals[i].size(); ++y) s += std::sqrt(marginals[i][y] * marginals[j][y]);
      m.values[i * n + j] = m.values[j * n + i] = s * dy;
    }
  }
  return m;
}

std::vector<int> assign_outcomes(const TrajectorySet& traj, std::span<const Interval> regions,
                                 std::size_t pointer_axis) {
  if (pointer_axis >= traj.dims) throw GridMismatch("pointer axis outside the trajectory dimension");
  std::vector<int> out(traj.size(), -1);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double y = traj.point(i)[pointer_axis];
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (contains(regions[r], y)) {
        out[i] = static_cast<int>(r);
        break;
      }
    }
  }
  return out;
}

OutcomeStatistics readout(const TrajectorySet& traj, std::span<const Interval> regions,
                          std::size_t pointer_axis, std::vector<double> targets) {
  if (traj.size() == 0) throw InvalidArgument("readout needs at least one trajectory");
  OutcomeStatistics s;
  s.counts.assign(regions.size(), 0);
  s.total = traj.size();
  for (int k : assign_outcomes(traj, regions, pointer_axis)) {
    if (k < 0) {
      ++s.unassigned;
    } else {
      ++s.counts[static_cast<std::size_t>(k)];
    }
  }
  if (static_cast<double>(s.unassigned) > 1e-3 * static_cast<double>(s.total)) {
    throw TooManyUnassigned(std::to_string(s.unassigned) + " of " + std::to_string(s.total) +
                            " trajectories lie outside every outcome region (limit 0.1%)");
  }
  for (std::uint64_t c : s.counts) s.frequencies.push_back(static_cast<double>(c) / static_cast<double>(s.total));
  s.targets = std::move(targets);
  return s;
}

OutcomeStatistics readout(const TrajectorySet& traj, const MeasurementSetup& setup,
                          std::vector<double> targets) {
  auto s = readout(traj, setup.outcome_regions, traj.dims - 1, std::move(targets));
  s.eigenvalues = setup.observable.eigenvalues;
  return s;
}

std::vector<double> born_rule_report(const OutcomeStatistics& stats) {
  if (stats.targets.size() != stats.frequencies.size()) throw InvalidArgument("targets and frequencies differ in length");
  std::vector<double> z;
  const double m = static_cast<double>(stats.total);
  for (std::size_t k = 0; k < stats.frequencies.size(); ++k) {
    const double p = stats.targets[k];
    const double d = stats.frequencies[k] - p;
    const double sd = std::sqrt(p * (1.0 - p) / m);
    if (sd > 0.0) {
      z.push_back(d / sd);
    } else {
      z.push_back(d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d));
    }
  }
  return z;
}

MeasurementRun run_measurement(const MeasurementSetup& setup, const SpinorWaveFunction& system_psi,
                               std::size_t count, std::uint64_t seed, double dt, double cap_scale) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  auto psi0 = compose_initial(system_psi, setup);
  auto schedule = measurement_hamiltonian(setup, psi0.grid(), psi0.spin_count());
  const auto targets = branch_masses(psi0, setup.observable);

  MeasurementRun r;
  r.initial = sample_density(density(psi0), count, seed);
  const double duration = setup.readout_time - psi0.time();
  if (!(duration > 0.0)) throw ValidationFailure("readout_time must be after the initial time");
  r.speed_cap = cap_scale * 10.0 * psi0.grid().diameter() / duration;
  GuidedEnsemble ens(std::move(psi0), std::move(schedule), r.initial, dt, r.speed_cap);
  ens.run_until(setup.readout_time);
  r.final = ens.trajectories();
  r.final_state = ens.state();
  r.conservation = ens.conservation();
  r.stats = readout(r.final, setup, targets);
  r.stats.overlap = overlap_matrix(r.final_state, setup.observable, r.final_state.grid().rank() - 1);
  return r;
}

SternGerlachResult stern_gerlach_experiment(const SternGerlachConfig& cfg, std::optional<TrajectorySet> initial) {
  if (!(cfg.dt > 0.0)) throw ValidationFailure("dt must be positive");
  if (!(cfg.sigma > 0.0)) throw ValidationFailure("sigma must be positive");
  if (!(cfg.t_on < cfg.t_off && cfg.t_off <= cfg.readout_time)) {
    throw ValidationFailure("need t_on < t_off <= readout_time");
  }
  if (cfg.ensemble_size == 0) throw ValidationFailure("ensemble_size must be at least 1");
  if (cfg.record_stride == 0) throw ValidationFailure("record_stride must be at least 1");
  const double weight = std::norm(cfg.alpha) + std::norm(cfg.beta);
  if (!(weight > 0.0)) throw ValidationFailure("spinor (alpha, beta) must be nonzero");

  const Grid g({{cfg.points, cfg.lower, cfg.upper}});
  SpinorWaveFunction psi(g, 2);
  const double amp = std::pow(2.0 * std::numbers::pi * cfg.sigma * cfg.sigma, -0.25);
  for (std::size_t c = 0; c < cfg.points; ++c) {
    const double z = g.coordinate(c, 0);
    const double phi = amp * std::exp(-z * z / (4.0 * cfg.sigma * cfg.sigma));
    psi.component(0)[c] = cfg.alpha * phi;
    psi.component(1)[c] = cfg.beta * phi;
  }
  psi = normalize(std::move(psi));
  const auto obs = DiscreteObservable::spin({1.0, -1.0});
  const auto targets = branch_masses(psi, obs);

  const Hamiltonian free(g, 2, {cfg.mass}, cfg.hbar);
  Hamiltonian on = free;
  std::vector<double> up(cfg.points), down(cfg.points);
  for (std::size_t c = 0; c < cfg.points; ++c) {
    up[c] = -cfg.field * g.coordinate(c, 0);
    down[c] = -up[c];
  }
  on.set_diagonal_potential({up, down});
  HamiltonianSchedule sched(free);
  sched.add_stage(cfg.t_on, on);
  sched.add_stage(cfg.t_off, free);

  SternGerlachResult r;
  if (initial) {
    if (initial->dims != 1) throw GridMismatch("Stern-Gerlach ensemble must be one-dimensional");
    r.initial = std::move(*initial);
  } else {
    r.initial = sample_density(density(psi), cfg.ensemble_size, cfg.seed);
  }
  r.speed_cap = 10.0 * g.diameter() / (cfg.readout_time - psi.time());
  GuidedEnsemble ens(psi, sched, r.initial, cfg.dt, r.speed_cap);

  const std::size_t keep = cfg.history_trajectories == 0
                               ? r.initial.size()
                               : std::min(cfg.history_trajectories, r.initial.size());
  r.history.dims = 1;
  // No-crossing is checked on the full ensemble at every step; the history
  // keeps a subset at the recording stride.
  std::vector<std::size_t> order(r.initial.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return r.initial.positions[a] < r.initial.positions[b]; });
  auto check_order = [&](const TrajectorySet& t) {
    for (std::size_t k = 1; k < order.size(); ++k) {
      if (!(t.positions[order[k - 1]] <= t.positions[order[k]])) r.no_crossing = false;
    }
  };
  auto record = [&](const TrajectorySet& t) {
    r.history.times.push_back(t.time);
    r.history.frames.emplace_back(t.positions.begin(), t.positions.begin() + static_cast<std::ptrdiff_t>(keep));
  };
  record(ens.trajectories());
  std::size_t step = 0;
  ens.run_until(cfg.readout_time, [&](const GuidedEnsemble& e) {
    check_order(e.trajectories());
    if (++step % cfg.record_stride == 0 || e.time() >= cfg.readout_time) record(e.trajectories());
  });

  r.final = ens.trajectories();
  r.conservation = ens.conservation();
  const Interval regions[] = {{0.0, cfg.upper}, {cfg.lower, 0.0}};
  r.outcomes = assign_outcomes(r.final, regions, 0);
  r.stats = readout(r.final, regions, 0, targets);
  r.stats.eigenvalues = obs.eigenvalues;
  r.stats.overlap = overlap_matrix(ens.state(), obs, 0);
  return r;
}

}  // namespace bohm
