#include "bohm/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <openssl/evp.h>

#include "bohm/equilibrium.hpp"
#include "bohm/errors.hpp"
#include "bohm/io.hpp"
#include "bohm/phonon.hpp"

#ifndef BOHMSIM_VERSION
#define BOHMSIM_VERSION "0.0.0"
#endif

namespace bohm {

namespace {

// Typed access to a resolved config. Keys are known to exist with the right
// JSON type, so only range errors remain; they name the dotted path.
class Params {
 public:
  Params(const json& j, std::string prefix = "") : j_(&j), prefix_(std::move(prefix)) {}

  std::string path(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  Params sub(const char* key) const { return Params(j_->at(key), path(key)); }
  double number(const char* key) const { return j_->at(key).get<double>(); }
  std::size_t count(const char* key) const { return j_->at(key).get<std::size_t>(); }
  std::uint64_t seed(const char* key) const { return j_->at(key).get<std::uint64_t>(); }
  bool flag(const char* key) const { return j_->at(key).get<bool>(); }
  std::vector<double> numbers(const char* key) const { return j_->at(key).get<std::vector<double>>(); }
  std::vector<Interval> intervals(const char* key) const {
    std::vector<Interval> out;
    for (const auto& r : j_->at(key)) {
      const auto v = r.get<std::vector<double>>();
      if (v.size() != 2) fail(key, "each interval needs exactly two numbers");
      out.push_back({v[0], v[1]});
    }
    return out;
  }

  [[noreturn]] void fail(const char* key, const std::string& why) const {
    throw ValidationFailure("field '" + path(key) + "': " + why);
  }
  double positive(const char* key) const {
    const double x = number(key);
    if (!(x > 0.0) || !std::isfinite(x)) fail(key, "must be positive, got " + format_double(x));
    return x;
  }
  double non_negative(const char* key) const {
    const double x = number(key);
    if (!(x >= 0.0) || !std::isfinite(x)) fail(key, "must be non-negative, got " + format_double(x));
    return x;
  }
  std::size_t at_least(const char* key, std::size_t lo) const {
    const std::size_t n = count(key);
    if (n < lo) fail(key, "must be at least " + std::to_string(lo) + ", got " + std::to_string(n));
    return n;
  }

 private:
  const json* j_;
  std::string prefix_;
};

Axis axis_from(const Params& p) {
  const std::size_t n = p.at_least("points", Grid::kMinAxisPoints);
  if ((n & (n - 1)) != 0) p.fail("points", "must be a power of two, got " + std::to_string(n));
  const double lo = p.number("lower"), hi = p.number("upper");
  if (!(hi > lo)) p.fail("upper", "must exceed lower");
  return {n, lo, hi};
}

// Collects metrics, checks and output files for one run.
class Report {
 public:
  void metric(const std::string& name, json value) { metrics_[name] = std::move(value); }
  void check(const std::string& name, double value, const std::string& relation, double threshold,
             const std::string& oracle) {
    bool ok = false;
    if (relation == "<") ok = value < threshold;
    else if (relation == "<=") ok = value <= threshold;
    else if (relation == ">") ok = value > threshold;
    else if (relation == "==") ok = value == threshold;
    checks_.push_back({name, value, relation, threshold, ok, oracle});
  }
  void file(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
  void capped(std::uint64_t n) { capped_ += n; }

  void conservation(const ConservationReport& c, const Params& checks) {
    metric("norm_drift", c.norm_drift);
    metric("energy_drift", c.energy_drift);
    check("norm_drift", c.norm_drift, "<", checks.number("norm_drift_max"), "unitary propagation");
    check("energy_drift", c.energy_drift, "<", checks.number("energy_drift_max"), "energy conservation per stage");
  }

  const json& metrics() const { return metrics_; }
  const std::vector<CheckResult>& checks() const { return checks_; }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
  std::uint64_t capped_total() const { return capped_; }

 private:
  json metrics_ = json::object();
  std::vector<CheckResult> checks_;
  std::vector<std::pair<std::string, std::string>> files_;
  std::uint64_t capped_ = 0;
};

json merged(json a, const json& b) {
  a.update(b);
  return a;
}

json conservation_checks() { return {{"norm_drift_max", 1e-10}, {"energy_drift_max", 1e-6}}; }

std::string csv_row(std::initializer_list<double> values) {
  std::string s;
  bool first = true;
  for (double v : values) {
    if (!first) s += ',';
    s += format_double(v);
    first = false;
  }
  s += '\n';
  return s;
}

TrajectorySet first_trajectories(const TrajectorySet& t, std::size_t k) {
  TrajectorySet out = t;
  k = std::min(k, t.size());
  out.positions.assign(t.positions.begin(), t.positions.begin() + static_cast<std::ptrdiff_t>(k * t.dims));
  return out;
}

std::string history_csv(const TrajectoryHistory& h) {
  std::ostringstream os;
  h.write_csv(os);
  return os.str();
}

double speed_cap_for(const Grid& g, double duration) { return 10.0 * g.diameter() / duration; }

// Histogram of a 1D density with exact and empirical coarse masses.
std::string histogram_csv(const DensityField& rho, const TrajectorySet& traj, const CoarseGraining& cg) {
  const auto exact = coarse_masses(rho, cg);
  const auto emp = empirical_fractions(traj, cg);
  const Axis& ax = rho.grid.axis(0);
  const double width = ax.length() / static_cast<double>(exact.size());
  std::string s = "bin,lower,upper,empirical,exact\n";
  for (std::size_t b = 0; b < exact.size(); ++b) {
    const double lo = ax.lower + static_cast<double>(b) * width - 0.5 * ax.spacing();
    s += std::to_string(b) + "," + csv_row({lo, lo + width, emp[b], exact[b]});
  }
  return s;
}

// Amplitude of a normalized Gaussian with density standard deviation sigma.
double gaussian(double x, double sigma, double centre) {
  const double d = x - centre;
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25) * std::exp(-d * d / (4.0 * sigma * sigma));
}

// Norm and energy drift of a closed-form evolution: |sum |c|^2 - 1|, and 0
// for the energy since every mode only picks up a phase.
void closed_form_conservation(Report& r, double norm_error, const Params& checks) {
  r.conservation({norm_error, 0.0}, checks);
}

double coefficient_norm_error(const std::vector<cplx>& c) {
  double n = 0.0;
  for (const cplx& z : c) n += std::norm(z);
  return std::abs(n - 1.0);
}

// ------------------------------------------------------------ free-gaussian

json free_gaussian_defaults() {
  return {{"experiment", "free-gaussian"},
          {"seed", 1u},
          {"M", 10000u},
          {"dt", 0.01},
          {"hbar", 1.0},
          {"mass", 1.0},
          {"grid", {{"points", 1024u}, {"lower", -25.0}, {"upper", 25.0}}},
          {"sigma", 1.0},
          {"x0", 0.0},
          {"p0", 0.0},
          {"spreading_times", 2.0},
          {"bins", 32u},
          {"record_stride", 10u},
          {"history_trajectories", 20u},
          {"checks", merged(json{{"tv_factor", 2.0}}, conservation_checks())}};
}

struct FreeGaussian {
  Grid grid;
  double mass, hbar, sigma, x0, p0, duration, dt;
  std::size_t ensemble, bins, stride, keep;
  std::uint64_t seed;
};

FreeGaussian free_gaussian_from(const Params& p) {
  const Grid grid({axis_from(p.sub("grid"))});
  FreeGaussian f{grid, p.positive("mass"), p.positive("hbar"), p.positive("sigma"), p.number("x0"), p.number("p0"),
                 0.0, p.positive("dt"), p.at_least("M", 1), p.at_least("bins", 2), p.at_least("record_stride", 1),
                 p.count("history_trajectories"), p.seed("seed")};
  f.duration = p.positive("spreading_times") * 2.0 * f.mass * f.sigma * f.sigma / f.hbar;
  if (grid.axis(0).points % f.bins != 0) p.fail("bins", "must divide grid.points");
  p.sub("checks").positive("tv_factor");
  return f;
}

void free_gaussian_run(const Params& p, Report& r) {
  const auto f = free_gaussian_from(p);
  const auto psi = normalize(SpinorWaveFunction::from_function(f.grid, [&](std::span<const double> q) {
    return gaussian(q[0], f.sigma, f.x0) * std::polar(1.0, f.p0 * q[0]);
  }));
  const Hamiltonian h(f.grid, 1, {f.mass}, f.hbar);
  const auto start = sample_density(density(psi), f.ensemble, f.seed);
  GuidedEnsemble ens(psi, HamiltonianSchedule(h), start, f.dt, speed_cap_for(f.grid, f.duration));
  TrajectoryHistory hist;
  hist.dims = 1;
  hist.record(first_trajectories(start, f.keep));
  std::size_t step = 0;
  ens.run_until(f.duration, [&](const GuidedEnsemble& e) {
    if (++step % f.stride == 0 || e.time() >= f.duration) hist.record(first_trajectories(e.trajectories(), f.keep));
  });

  const auto rho = density(ens.state());
  const CoarseGraining cg(f.grid, {f.bins});
  const double tv = total_variation(ens.trajectories(), rho, cg);
  const double baseline = resampled_tv_baseline(rho, cg, f.ensemble, f.seed);
  const double tau = 2.0 * f.mass * f.sigma * f.sigma / f.hbar;
  const double width = f.sigma * std::sqrt(1.0 + std::pow(f.duration / tau, 2));
  const double centre = f.x0 + f.hbar * f.p0 * f.duration / f.mass;
  const double dx = f.grid.axis(0).spacing();
  const auto rho0 = density(psi);
  double l1 = 0.0;
  std::string dens = "x,initial,final,analytic\n";
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    const double x = f.grid.coordinate(i, 0);
    const double exact = std::pow(gaussian(x, width, centre), 2);
    l1 += std::abs(rho.values[i] - exact) * dx;
    dens += csv_row({x, rho0.values[i], rho.values[i], exact});
  }
  r.metric("duration", f.duration);
  r.metric("total_variation", tv);
  r.metric("iid_baseline", baseline);
  r.metric("analytic_density_l1", l1);
  r.check("total_variation", tv, "<=", p.sub("checks").number("tv_factor") * baseline,
          "resampled i.i.d. baseline times tv_factor");
  r.conservation(ens.conservation(), p.sub("checks"));
  r.capped(ens.trajectories().capped_evaluations);
  r.file("histogram.csv", histogram_csv(rho, ens.trajectories(), cg));
  r.file("density.csv", dens);
  r.file("trajectories.csv", history_csv(hist));
}

// ------------------------------------------------------------- double-slit

json double_slit_defaults() {
  return {{"experiment", "double-slit"},
          {"seed", 1u},
          {"M", 10000u},
          {"dt", 0.02},
          {"duration", 6.0},
          {"hbar", 1.0},
          {"mass", 1.0},
          {"grid",
           {{"x", {{"points", 256u}, {"lower", -32.0}, {"upper", 32.0}}},
            {"y", {{"points", 128u}, {"lower", -10.0}, {"upper", 30.0}}}}},
          {"slits", {{"separation", 6.0}, {"sigma_x", 0.5}, {"sigma_y", 1.0}, {"momentum_y", 2.0}}},
          {"bins", 32u},
          {"record_stride", 5u},
          {"history_trajectories", 50u},
          {"checks", merged(json{{"tv_factor", 2.0}}, conservation_checks())}};
}

struct DoubleSlit {
  Grid grid;
  double mass, hbar, dt, duration, separation, sx, sy, ky;
  std::size_t ensemble, bins, stride, keep;
  std::uint64_t seed;
};

DoubleSlit double_slit_from(const Params& p) {
  const Params g = p.sub("grid"), s = p.sub("slits");
  const Grid grid({axis_from(g.sub("x")), axis_from(g.sub("y"))});
  DoubleSlit d{grid, p.positive("mass"), p.positive("hbar"), p.positive("dt"), p.positive("duration"),
               s.positive("separation"), s.positive("sigma_x"), s.positive("sigma_y"), s.number("momentum_y"),
               p.at_least("M", 1), p.at_least("bins", 2), p.at_least("record_stride", 1),
               p.count("history_trajectories"), p.seed("seed")};
  if (grid.axis(0).points % d.bins != 0) p.fail("bins", "must divide grid.x.points");
  const Axis& x = grid.axis(0);
  if (std::abs(x.lower + x.upper) > 1e-12 * x.length()) g.sub("x").fail("lower", "x axis must be symmetric about 0");
  p.sub("checks").positive("tv_factor");
  return d;
}

void double_slit_run(const Params& p, Report& r) {
  const auto d = double_slit_from(p);
  const auto psi = normalize(SpinorWaveFunction::from_function(d.grid, [&](std::span<const double> q) {
    const double across = gaussian(q[0], d.sx, -0.5 * d.separation) + gaussian(q[0], d.sx, 0.5 * d.separation);
    return across * gaussian(q[1], d.sy, 0.0) * std::polar(1.0, d.ky * q[1]);
  }));
  const Hamiltonian h(d.grid, 1, {d.mass, d.mass}, d.hbar);
  const auto start = sample_density(density(psi), d.ensemble, d.seed);
  GuidedEnsemble ens(psi, HamiltonianSchedule(h), start, d.dt, speed_cap_for(d.grid, d.duration));
  TrajectoryHistory hist;
  hist.dims = 2;
  hist.record(first_trajectories(start, d.keep));
  std::vector<int> side(d.ensemble);
  for (std::size_t i = 0; i < d.ensemble; ++i) side[i] = start.positions[2 * i] < 0.0 ? -1 : 1;
  std::vector<std::uint8_t> crossed(d.ensemble, 0);
  std::size_t step = 0;
  ens.run_until(d.duration, [&](const GuidedEnsemble& e) {
    const auto& t = e.trajectories();
    for (std::size_t i = 0; i < d.ensemble; ++i) {
      if ((t.positions[2 * i] < 0.0 ? -1 : 1) != side[i]) crossed[i] = 1;
    }
    if (++step % d.stride == 0 || e.time() >= d.duration) hist.record(first_trajectories(t, d.keep));
  });

  const std::size_t keep_axes[] = {0};
  const auto rho_x = marginal(density(ens.state()), keep_axes);
  TrajectorySet xs;
  xs.dims = 1;
  xs.time = ens.time();
  for (std::size_t i = 0; i < d.ensemble; ++i) xs.positions.push_back(ens.trajectories().positions[2 * i]);
  const CoarseGraining cg(rho_x.grid, {d.bins});
  const double tv = total_variation(xs, rho_x, cg);
  const double baseline = resampled_tv_baseline(rho_x, cg, d.ensemble, d.seed);
  const double crossings = static_cast<double>(std::count(crossed.begin(), crossed.end(), 1));
  r.metric("total_variation_x", tv);
  r.metric("iid_baseline_x", baseline);
  r.metric("symmetry_axis_crossings", crossings);
  r.check("total_variation_x", tv, "<=", p.sub("checks").number("tv_factor") * baseline,
          "resampled i.i.d. baseline times tv_factor");
  r.check("symmetry_axis_crossings", crossings, "==", 0.0, "reflection symmetry of the state");
  r.conservation(ens.conservation(), p.sub("checks"));
  r.capped(ens.trajectories().capped_evaluations);
  r.file("histogram_x.csv", histogram_csv(rho_x, xs, cg));
  r.file("trajectories.csv", history_csv(hist));
}

// ----------------------------------------------------------- stern-gerlach

json stern_gerlach_defaults() {
  return {{"experiment", "stern-gerlach"},
          {"seed", 1u},
          {"M", 10000u},
          {"dt", 0.005},
          {"hbar", 1.0},
          {"mass", 1.0},
          {"grid", {{"points", 1024u}, {"lower", -40.0}, {"upper", 40.0}}},
          {"sigma", 1.0},
          {"up_probability", 0.3},
          {"relative_phase", 0.0},
          {"field", 2.0},
          {"t_on", 0.0},
          {"t_off", 2.0},
          {"readout_time", 4.0},
          {"record_stride", 10u},
          {"history_trajectories", 200u},
          {"checks", merged(json{{"z_max", 3.0}}, conservation_checks())}};
}

SternGerlachConfig stern_gerlach_from(const Params& p) {
  SternGerlachConfig c;
  const Axis ax = axis_from(p.sub("grid"));
  c.points = ax.points;
  c.lower = ax.lower;
  c.upper = ax.upper;
  c.mass = p.positive("mass");
  c.hbar = p.positive("hbar");
  c.sigma = p.positive("sigma");
  const double up = p.number("up_probability");
  if (!(up > 0.0 && up < 1.0)) p.fail("up_probability", "must lie strictly between 0 and 1");
  c.alpha = std::sqrt(up);
  c.beta = std::polar(std::sqrt(1.0 - up), p.number("relative_phase"));
  c.field = p.positive("field");
  c.t_on = p.non_negative("t_on");
  c.t_off = p.number("t_off");
  if (!(c.t_off > c.t_on)) p.fail("t_off", "must exceed t_on");
  c.readout_time = p.number("readout_time");
  if (!(c.readout_time >= c.t_off)) p.fail("readout_time", "must not precede t_off");
  c.dt = p.positive("dt");
  c.ensemble_size = p.at_least("M", 1);
  c.seed = p.seed("seed");
  c.record_stride = p.at_least("record_stride", 1);
  c.history_trajectories = p.count("history_trajectories");
  p.sub("checks").positive("z_max");
  return c;
}

void stern_gerlach_run(const Params& p, Report& r) {
  const auto cfg = stern_gerlach_from(p);
  const auto res = stern_gerlach_experiment(cfg);
  const auto z = born_rule_report(res.stats);
  r.metric("outcome_statistics", to_json(res.stats));
  r.metric("up_frequency", res.stats.frequencies[0]);
  r.metric("up_z_score", z[0]);
  r.check("up_z_score_abs", std::abs(z[0]), "<", p.sub("checks").number("z_max"), "binomial sampling error");
  r.check("no_crossing", res.no_crossing ? 1.0 : 0.0, "==", 1.0, "ordering of 1D trajectories");
  r.conservation(res.conservation, p.sub("checks"));
  r.capped(res.final.capped_evaluations);
  r.file("trajectories.csv", history_csv(res.history));
}

// ------------------------------------------------- two-outcome-measurement

json two_outcome_defaults() {
  return {{"experiment", "two-outcome-measurement"},
          {"seed", 1u},
          {"M", 10000u},
          {"dt", 0.01},
          {"hbar", 1.0},
          {"system",
           {{"points", 128u},
            {"lower", -16.0},
            {"upper", 16.0},
            {"mass", 10.0},
            {"centers", {-6.0, 6.0}},
            {"sigma", 0.7071067811865476},
            {"weights", {0.3, 0.7}}}},
          {"observable", {{"eigenvalues", {-1.0, 1.0}}, {"regions", {{-16.0, 0.0}, {0.0, 15.75}}}}},
          {"pointer",
           {{"points", 128u},
            {"lower", -16.0},
            {"upper", 16.0},
            {"mass", 10.0},
            {"center", 0.0},
            {"width", 1.0},
            {"coupling", 5.0},
            {"t_on", 0.0},
            {"t_off", 1.0},
            {"readout_time", 1.5},
            {"regions", {{-16.0, 0.0}, {0.0, 15.75}}}}},
          {"robustness",
           {{"enabled", false}, {"dt_factor", 0.5}, {"cap_factor", 10.0}, {"width_factors", {0.8, 1.2}}, {"z_shift_max", 2.0}}},
          {"checks", merged(json{{"z_max", 3.0}, {"overlap_max", 1e-4}}, conservation_checks())}};
}

struct TwoOutcome {
  MeasurementSetup setup;
  Grid system_grid;
  std::vector<double> centers, weights;
  double sigma, dt;
  std::size_t ensemble;
  std::uint64_t seed;
};

TwoOutcome two_outcome_from(const Params& p) {
  const Params sys = p.sub("system"), obs = p.sub("observable"), ptr = p.sub("pointer");
  TwoOutcome t{{}, Grid({axis_from(sys)}), sys.numbers("centers"), sys.numbers("weights"), sys.positive("sigma"),
               p.positive("dt"), p.at_least("M", 1), p.seed("seed")};
  if (t.weights.size() != t.centers.size()) sys.fail("weights", "needs one weight per centre");
  double total = 0.0;
  for (double w : t.weights) {
    if (!(w >= 0.0)) sys.fail("weights", "must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) sys.fail("weights", "must not all vanish");
  auto& s = t.setup;
  s.observable = DiscreteObservable::region(obs.numbers("eigenvalues"), obs.intervals("regions"));
  if (s.observable.size() != t.centers.size()) obs.fail("eigenvalues", "needs one eigenvalue per system centre");
  s.pointer = axis_from(ptr);
  s.pointer_mass = ptr.positive("mass");
  s.pointer_center = ptr.number("center");
  s.pointer_width = ptr.positive("width");
  s.coupling = ptr.number("coupling");
  s.t_on = ptr.non_negative("t_on");
  s.t_off = ptr.number("t_off");
  s.readout_time = ptr.number("readout_time");
  s.outcome_regions = ptr.intervals("regions");
  s.system_masses = {sys.positive("mass")};
  s.hbar = p.positive("hbar");
  s.validate();
  const Params rob = p.sub("robustness");
  rob.positive("dt_factor");
  rob.positive("cap_factor");
  for (double f : rob.numbers("width_factors")) {
    if (!(f > 0.0)) rob.fail("width_factors", "must be positive");
  }
  rob.positive("z_shift_max");
  p.sub("checks").positive("z_max");
  return t;
}

SpinorWaveFunction two_outcome_system(const TwoOutcome& t) {
  return normalize(SpinorWaveFunction::from_function(t.system_grid, [&](std::span<const double> q) {
    cplx a = 0.0;
    for (std::size_t k = 0; k < t.centers.size(); ++k) a += std::sqrt(t.weights[k]) * gaussian(q[0], t.sigma, t.centers[k]);
    return a;
  }));
}

void two_outcome_run(const Params& p, Report& r) {
  const auto t = two_outcome_from(p);
  const auto sys = two_outcome_system(t);
  auto run = run_measurement(t.setup, sys, t.ensemble, t.seed, t.dt);
  const std::size_t pointer_axis = pointer_axis_index(t.system_grid);
  run.stats.overlap = overlap_matrix(run.final_state, t.setup.observable, pointer_axis);
  const auto z = born_rule_report(run.stats);
  const Params checks = p.sub("checks");
  r.metric("outcome_statistics", to_json(run.stats));
  r.metric("z_scores", z);
  double zmax = 0.0;
  for (double v : z) zmax = std::max(zmax, std::abs(v));
  r.check("max_abs_z_score", zmax, "<", checks.number("z_max"), "binomial sampling error");
  r.check("pointer_overlap", run.stats.overlap->max_off_diagonal(), "<", checks.number("overlap_max"),
          "branch overlap of pointer marginals");
  r.metric("speed_cap", run.speed_cap);
  r.conservation(run.conservation, checks);
  r.capped(run.final.capped_evaluations);

  const Params rob = p.sub("robustness");
  if (rob.flag("enabled")) {
    const double f0 = run.stats.frequencies[0];
    const double q = run.stats.targets[0];
    const double sigma = std::sqrt(q * (1.0 - q) / static_cast<double>(t.ensemble));
    auto shift = [&](const std::string& name, const MeasurementSetup& s, double dt, double cap_scale) {
      const auto v = run_measurement(s, sys, t.ensemble, t.seed, dt, cap_scale);
      const double d = std::abs(v.stats.frequencies[0] - f0) / sigma;
      r.metric("shift_" + name, d);
      r.check("shift_" + name, d, "<", rob.number("z_shift_max"), "outcome frequency stability in sigma units");
      r.capped(v.final.capped_evaluations);
    };
    shift("dt", t.setup, t.dt * rob.number("dt_factor"), 1.0);
    shift("node_cap", t.setup, t.dt, rob.number("cap_factor"));
    for (double f : rob.numbers("width_factors")) {
      auto s = t.setup;
      s.pointer_width *= f;
      shift("pointer_width_" + format_double(f), s, t.dt, 1.0);
    }
  }

  const auto outcomes = assign_outcomes(run.final, t.setup.outcome_regions, pointer_axis);
  std::string csv = "trajectory,system,pointer,outcome\n";
  for (std::size_t i = 0; i < run.final.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(run.final.positions[2 * i]) + "," +
           format_double(run.final.positions[2 * i + 1]) + "," + std::to_string(outcomes[i]) + "\n";
  }
  r.file("outcomes.csv", csv);
  const std::size_t keep_axes[] = {pointer_axis};
  const auto my = marginal(density(run.final_state), keep_axes);
  std::string pm = "y,density\n";
  for (std::size_t j = 0; j < my.values.size(); ++j) pm += csv_row({my.grid.axis(0).coordinate(j), my.values[j]});
  r.file("pointer_marginal.csv", pm);
}

// ------------------------------------------------------------ entangled-pair

json entangled_defaults() {
  return {{"experiment", "entangled-pair"},
          {"seed", 1u},
          {"dt", 0.01},
          {"hbar", 1.0},
          {"mass", 1.0},
          {"grid", {{"points", 128u}, {"lower", -8.0}, {"upper", 8.0}}},
          {"sigma", 1.0},
          {"separation", 2.0},
          {"momentum", 1.0},
          {"probe", {{"x1", 0.0}, {"x2_a", -2.0}, {"x2_b", 2.0}}},
          {"evolve_time", 1.0},
          {"checks", merged(json{{"product_max", 1e-10}, {"entangled_threshold", 0.1}, {"oracle_max", 1e-6}}, conservation_checks())}};
}

struct Entangled {
  Grid grid;
  double mass, hbar, dt, sigma, s, k, x1, x2a, x2b, t_end;
};

Entangled entangled_from(const Params& p) {
  const Axis ax = axis_from(p.sub("grid"));
  const Params probe = p.sub("probe");
  Entangled e{Grid({ax, ax}), p.positive("mass"), p.positive("hbar"), p.positive("dt"), p.positive("sigma"),
              p.positive("separation"), p.number("momentum"), probe.number("x1"), probe.number("x2_a"),
              probe.number("x2_b"), p.non_negative("evolve_time")};
  for (const char* key : {"x1", "x2_a", "x2_b"}) {
    const double x = probe.number(key);
    if (x < ax.lower || x >= ax.upper) probe.fail(key, "must lie inside the grid");
  }
  p.sub("checks").positive("entangled_threshold");
  return e;
}

void entangled_run(const Params& p, Report& r) {
  const auto e = entangled_from(p);
  const Params checks = p.sub("checks");
  auto g = [&](double x, double c) { return gaussian(x, e.sigma, c); };
  const auto product = normalize(SpinorWaveFunction::from_function(e.grid, [&](std::span<const double> q) {
    return g(q[0], 0.0) * std::polar(1.0, e.k * q[0]) * (g(q[1], -0.5 * e.s) + g(q[1], 0.5 * e.s));
  }));
  auto a_term = [&](double x1, double x2) { return g(x1, e.s) * std::polar(1.0, e.k * x1) * g(x2, e.s); };
  auto b_term = [&](double x1, double x2) { return g(x1, -e.s) * std::polar(1.0, -e.k * x1) * g(x2, -e.s); };
  const auto entangled = normalize(SpinorWaveFunction::from_function(
      e.grid, [&](std::span<const double> q) { return a_term(q[0], q[1]) + b_term(q[0], q[1]); }));
  // Closed-form v1 of the entangled state at t = 0.
  auto v1_exact = [&](double x1, double x2) {
    const cplx a = a_term(x1, x2), b = b_term(x1, x2);
    const double s2 = 2.0 * e.sigma * e.sigma;
    const cplx da = a * cplx(-(x1 - e.s) / s2, e.k);
    const cplx db = b * cplx(-(x1 + e.s) / s2, -e.k);
    return e.hbar / e.mass * ((da + db) / (a + b)).imag();
  };
  const auto roles = uniform_roles(e.grid, e.mass);
  const auto ent0 = nonlocality_probe(entangled, roles, e.x1, e.x2a, e.x2b, e.hbar);
  const double oracle_err = std::max(std::abs(ent0.first - v1_exact(e.x1, e.x2a)), std::abs(ent0.second - v1_exact(e.x1, e.x2b)));
  r.metric("oracle_delta_v1", std::abs(v1_exact(e.x1, e.x2a) - v1_exact(e.x1, e.x2b)));
  r.check("oracle_agreement", oracle_err, "<", checks.number("oracle_max"), "closed-form velocity at t = 0");

  const Hamiltonian h(e.grid, 1, {e.mass, e.mass}, e.hbar);
  const HamiltonianSchedule sched(h);
  ConservationReport cons;
  std::string csv = "state,time,x2,v1\n";
  auto probe_state = [&](const SpinorWaveFunction& psi0, const std::string& name) {
    const auto psi = evolve_to(psi0, sched, e.t_end, e.dt).back();
    cons.norm_drift = std::max(cons.norm_drift, std::abs(norm_squared(psi) - norm_squared(psi0)));
    const double e0 = energy_expectation(psi0, h);
    cons.energy_drift = std::max(cons.energy_drift, std::abs(energy_expectation(psi, h) - e0) / std::abs(e0));
    const auto before = nonlocality_probe(psi0, roles, e.x1, e.x2a, e.x2b, e.hbar);
    const auto after = nonlocality_probe(psi, roles, e.x1, e.x2a, e.x2b, e.hbar);
    for (const auto& [t, v] : {std::pair{0.0, before}, std::pair{e.t_end, after}}) {
      csv += name + "," + csv_row({t, e.x2a, v.first}) + name + "," + csv_row({t, e.x2b, v.second});
    }
    return std::pair{std::abs(before.first - before.second), std::abs(after.first - after.second)};
  };
  const auto [prod0, prod1] = probe_state(product, "product");
  const auto [ent0_d, ent1_d] = probe_state(entangled, "entangled");
  const double dprod = std::max(prod0, prod1);
  const double dent = std::min(ent0_d, ent1_d);
  r.metric("product_delta_v1", dprod);
  r.metric("entangled_delta_v1", dent);
  r.check("product_delta_v1", dprod, "<", checks.number("product_max"), "factorized state");
  r.check("entangled_delta_v1", dent, ">", checks.number("entangled_threshold"), "preset threshold below the closed-form value");
  r.conservation(cons, checks);
  r.file("probe.csv", csv);
}

// -------------------------------------------------------------- relaxation

json relaxation_defaults() {
  const RelaxationConfig d;
  return {{"experiment", "relaxation"},
          {"seed", d.seed},
          {"M", d.ensemble_size},
          {"dt", d.dt},
          {"hbar", d.hbar},
          {"mass", d.mass},
          {"grid_points", d.grid_points},
          {"length", d.length},
          {"max_mode", static_cast<std::size_t>(d.max_mode)},
          {"duration", d.duration},
          {"record_interval", d.record_interval},
          {"bins", d.bins},
          {"patch_fraction", d.patch_fraction},
          {"equilibrium_start", d.equilibrium_start},
          {"checks", merged(json{{"h0_min", 1.0}, {"reduction_factor", 3.0}}, conservation_checks())}};
}

RelaxationConfig relaxation_from(const Params& p) {
  RelaxationConfig c;
  c.grid_points = p.at_least("grid_points", Grid::kMinAxisPoints);
  c.length = p.positive("length");
  c.max_mode = static_cast<int>(p.at_least("max_mode", 1));
  if (2 * static_cast<std::size_t>(c.max_mode) >= c.grid_points) p.fail("max_mode", "must stay below grid_points / 2");
  c.mass = p.positive("mass");
  c.hbar = p.positive("hbar");
  c.ensemble_size = p.at_least("M", 1);
  c.seed = p.seed("seed");
  c.duration = p.positive("duration");
  c.dt = p.positive("dt");
  c.record_interval = p.positive("record_interval");
  c.bins = p.at_least("bins", 2);
  if (c.grid_points % c.bins != 0) p.fail("bins", "must divide grid_points");
  c.patch_fraction = p.positive("patch_fraction");
  if (c.patch_fraction > 1.0) p.fail("patch_fraction", "must not exceed 1");
  c.equilibrium_start = p.flag("equilibrium_start");
  return c;
}

void relaxation_run(const Params& p, Report& r) {
  const auto cfg = relaxation_from(p);
  const auto res = relaxation_experiment(cfg);
  const auto& h = res.series.values;
  const Params checks = p.sub("checks");
  r.metric("mode_count", res.mode_count);
  r.metric("H_initial", h.front());
  r.metric("H_final", h.back());
  r.metric("H_slope", res.series.slope());
  r.check("H_initial", h.front(), ">", checks.number("h0_min"), "non-equilibrium start");
  r.check("H_final", h.back(), "<", h.front() / checks.number("reduction_factor"), "relaxation by reduction_factor");
  r.check("H_slope", res.series.slope(), "<", 0.0, "least-squares trend");
  r.conservation(res.conservation, checks);
  r.capped(res.capped_evaluations);
  std::ostringstream os;
  res.series.write_csv(os);
  r.file("h_function.csv", os.str());
}

// ------------------------------------------------------- phonon-dispersion

json chain_defaults() { return {{"mass", 1.0}, {"spring", 1.0}, {"spacing", 1.0}, {"hbar", 1.0}}; }

LatticeChain chain_from(const Params& c, std::size_t atoms) {
  LatticeChain ch;
  ch.atoms = atoms;
  ch.mass = c.positive("mass");
  ch.spring = c.positive("spring");
  ch.spacing = c.positive("spacing");
  ch.hbar = c.positive("hbar");
  return ch;
}

std::size_t chain_atoms(const Params& p, const char* key) {
  const std::size_t n = p.count(key);
  if (n < 8 || n % 2 != 0) p.fail(key, "atom count must be even and at least 8, got " + std::to_string(n));
  return n;
}

struct PacketBox {
  double widths;
  std::size_t nx, nt;
};

PacketBox packet_box_from(const Params& b) {
  return {b.positive("widths"), b.at_least("nx", 1), b.at_least("nt", 1)};
}

// Rectangle riding with the packet: +-widths / sigma_p in x, 1 / sigma_p in t.
SampleBox packet_box(const PacketBox& pb, double sigma_p, double drift) {
  SampleBox b;
  b.x_min = -pb.widths / sigma_p;
  b.x_max = pb.widths / sigma_p;
  b.nx = pb.nx;
  b.t_min = 0.0;
  b.t_max = 1.0 / sigma_p;
  b.nt = pb.nt;
  b.drift = drift;
  return b;
}

json phonon_dispersion_defaults() {
  return {{"experiment", "phonon-dispersion"},
          {"seed", 1u},
          {"chain", chain_defaults()},
          {"atom_counts", {8u, 64u, 256u}},
          {"sound_speed_atoms", 256u},
          {"sinc_momentum", 0.1},
          {"residual",
           {{"momenta", {0.05, 0.1, 0.2}},
            {"reference", 0.1},
            {"sigma_fraction", 0.1},
            {"momenta_count", 161u},
            {"box", {{"widths", 3.0}, {"nx", 96u}, {"nt", 8u}}}}},
          {"checks",
           merged(json{{"dense_max", 1e-10}, {"sound_speed_max", 1e-6}, {"identity_max", 1e-6}, {"scaling_max", 0.2}, {"sinc_max", 1e-10}},
                  conservation_checks())}};
}

void phonon_dispersion_validate(const Params& p) {
  const auto counts = p.numbers("atom_counts");
  if (counts.empty()) p.fail("atom_counts", "must not be empty");
  for (double n : counts) {
    if (n < 8 || std::fmod(n, 2.0) != 0.0) p.fail("atom_counts", "every atom count must be even and at least 8");
  }
  chain_from(p.sub("chain"), chain_atoms(p, "sound_speed_atoms")).validate(8);
  p.positive("sinc_momentum");
  const Params res = p.sub("residual");
  if (res.numbers("momenta").size() < 2) res.fail("momenta", "needs at least two momenta");
  for (double m : res.numbers("momenta")) {
    if (!(m > 0.0)) res.fail("momenta", "must be positive");
  }
  res.positive("reference");
  res.positive("sigma_fraction");
  res.at_least("momenta_count", 2);
  packet_box_from(res.sub("box"));
}

void phonon_dispersion_run(const Params& p, Report& r) {
  phonon_dispersion_validate(p);
  const Params checks = p.sub("checks"), chain = p.sub("chain");
  const LatticeChain base = chain_from(chain, 8);
  const double cs = base.sound_speed();

  double dense_worst = 0.0;
  std::string table = "atoms,j,p,omega,omega_over_cs_p\n";
  for (double nd : p.numbers("atom_counts")) {
    const auto ch = chain_from(chain, static_cast<std::size_t>(nd));
    const auto modes = normal_modes(ch);
    auto ours = modes.real_frequencies();
    std::sort(ours.begin(), ours.end());
    const auto dense = dense_chain_frequencies(ch);
    double worst = std::abs(ours[0] * ours[0] - dense[0] * dense[0]);
    for (std::size_t k = 1; k < ours.size(); ++k) worst = std::max(worst, std::abs(ours[k] - dense[k]));
    r.metric("dense_max_difference_N" + std::to_string(ch.atoms), worst);
    dense_worst = std::max(dense_worst, worst);
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double pk = modes.momentum(k);
      const double ratio = pk == 0.0 ? 1.0 : modes.frequency(k) / (cs * std::abs(pk));
      table += std::to_string(ch.atoms) + "," + std::to_string(modes.momentum_index(k)) + "," +
               csv_row({pk, modes.frequency(k), ratio});
    }
  }
  r.check("dense_diagonalization", dense_worst, "<", checks.number("dense_max"), "dense dynamical-matrix eigenvalues");

  const auto big = normal_modes(chain_from(chain, chain_atoms(p, "sound_speed_atoms")));
  const double cs_est = sound_speed_estimate(big);
  r.metric("sound_speed", cs);
  r.metric("sound_speed_estimate", cs_est);
  r.check("sound_speed", std::abs(cs_est - cs) / cs, "<", checks.number("sound_speed_max"), "a sqrt(kappa / m)");

  const double pa = p.number("sinc_momentum");
  const double ratio = lattice_frequency(base, pa / base.spacing) / (cs * pa / base.spacing);
  r.metric("omega_over_cs_p", ratio);
  r.check("sinc_ratio", std::abs(ratio - std::sin(0.5 * pa) / (0.5 * pa)), "<", checks.number("sinc_max"),
          "sin(pa/2) / (pa/2)");

  const Params res = p.sub("residual");
  const PacketBox pb = packet_box_from(res.sub("box"));
  const double frac = res.number("sigma_fraction");
  const std::size_t count = res.count("momenta_count");
  auto packet_residual = [&](double p0a) {
    const double p0 = p0a / base.spacing;
    return wave_equation_residual(gaussian_wave(base, p0, frac * p0, 0.0, count), packet_box(pb, frac * p0, cs), cs);
  };
  std::string scaling = "p0a,single_mode,identity,packet,packet_over_p0a2\n";
  const double reference = res.number("reference");
  const double ref_scaled = packet_residual(reference) / (reference * reference);
  double identity_worst = 0.0, scaling_worst = 0.0;
  for (double p0a : res.numbers("momenta")) {
    const double p0 = p0a / base.spacing;
    const double single = wave_equation_residual(single_mode_wave(base, p0), SampleBox{}, cs);
    const double identity = std::abs(1.0 - std::pow(lattice_frequency(base, p0) / (cs * p0), 2));
    const double packet = packet_residual(p0a);
    identity_worst = std::max(identity_worst, std::abs(single - identity));
    scaling_worst = std::max(scaling_worst, std::abs(packet / (p0a * p0a) / ref_scaled - 1.0));
    scaling += csv_row({p0a, single, identity, packet, packet / (p0a * p0a)});
  }
  const double ref_single = wave_equation_residual(single_mode_wave(base, reference / base.spacing), SampleBox{}, cs);
  r.metric("single_mode_residual_reference", ref_single);
  r.metric("packet_residual_reference", ref_scaled * reference * reference);
  r.check("dispersion_identity", identity_worst, "<", checks.number("identity_max"), "|1 - omega^2 / (c p)^2|");
  r.check("quadratic_scaling", scaling_worst, "<", checks.number("scaling_max"), "residual proportional to (p0 a)^2");
  closed_form_conservation(r, 0.0, checks);
  r.file("dispersion.csv", table);
  r.file("residual_scaling.csv", scaling);
}

// ----------------------------------------------------- phonon-trajectories

json phonon_trajectories_defaults() {
  const ComparisonConfig d;
  return {{"experiment", "phonon-trajectories"},
          {"seed", d.seed},
          {"M", d.ensemble_size},
          {"dt", d.dt},
          {"duration", d.duration},
          {"chain", merged(json{{"atoms", d.chain.atoms}}, chain_defaults())},
          {"j0", d.j0},
          {"sigma_j", d.sigma_j},
          {"x0", d.x0},
          {"record_stride", d.record_stride},
          {"history_trajectories", 4u},
          {"stationary",
           {{"atoms", 8u}, {"mode", 2u}, {"M", 2000u}, {"duration", 10.0}, {"dt", 0.05}, {"record_stride", 20u}}},
          {"checks", merged(json{{"centroid_max", 0.1}, {"stationary_z_max", 3.0}}, conservation_checks())}};
}

ComparisonConfig comparison_from(const Params& p) {
  ComparisonConfig c;
  c.chain = chain_from(p.sub("chain"), chain_atoms(p.sub("chain"), "atoms"));
  c.j0 = p.number("j0");
  const double half = static_cast<double>(c.chain.atoms / 2);
  if (!(c.j0 > 0.0 && c.j0 < half)) p.fail("j0", "must lie in (0, atoms / 2)");
  c.sigma_j = p.positive("sigma_j");
  c.x0 = p.number("x0");
  c.ensemble_size = p.at_least("M", 1);
  c.seed = p.seed("seed");
  c.duration = p.positive("duration");
  c.dt = p.positive("dt");
  c.record_stride = p.at_least("record_stride", 1);
  const Params st = p.sub("stationary");
  const std::size_t n = chain_atoms(st, "atoms");
  const std::size_t mode = st.at_least("mode", 1);
  if (mode > n / 2) st.fail("mode", "must not exceed atoms / 2");
  st.at_least("M", 2);
  st.positive("duration");
  st.positive("dt");
  st.at_least("record_stride", 1);
  return c;
}

void phonon_trajectories_run(const Params& p, Report& r) {
  const auto cfg = comparison_from(p);
  const Params checks = p.sub("checks");
  const auto cmp = compare_interpretations(cfg);
  const double dx1 = cmp.quasiparticle.back() - cmp.quasiparticle.front();
  const double dx2 = cmp.kinetic_centroid.back() - cmp.kinetic_centroid.front();
  r.metric("interpretation", "interpretation 1 uses the group-velocity operator (a modeling choice)");
  r.metric("quasiparticle_displacement", dx1);
  r.metric("kinetic_centroid_displacement", dx2);
  r.metric("atom_sign_changes", cmp.atom_sign_changes);
  r.metric("quasiparticle_sign_changes", cmp.quasiparticle_sign_changes);
  r.check("centroid_tracking", std::abs(dx2 - dx1) / std::abs(dx1), "<", checks.number("centroid_max"),
          "kinetic centroid of the atom ensemble");
  r.check("quasiparticle_monotone", static_cast<double>(cmp.quasiparticle_sign_changes), "==", 0.0, "smooth path");
  r.check("atoms_oscillate", static_cast<double>(cmp.atom_sign_changes), ">", 0.0, "velocity sign flips");
  r.capped(cmp.atoms.capped_evaluations);

  // Single-mode stationarity of one atom's displacement variance.
  const Params st = p.sub("stationary");
  const auto ch = chain_from(p.sub("chain"), st.count("atoms"));
  const auto modes = normal_modes(ch);
  const OnePhononField field(modes, OnePhononState::single_mode(modes, static_cast<int>(st.count("mode"))));
  const std::size_t m = st.count("M");
  const auto run = integrate_atoms(field, field.sample(m, cfg.seed, 0.0), st.number("duration"), st.number("dt"),
                                   st.count("record_stride"));
  // E[(a.z)^2 |w.z|^2] = |a|^2 + 2 |a.w|^2 for standard normal z and |w| = 1.
  const auto w = field.normal_weights(0.0);
  double a2 = 0.0;
  cplx aw = 0.0;
  for (std::size_t k = 1; k < ch.atoms; ++k) {
    const double ak = modes.real_modes()(0, static_cast<Eigen::Index>(k)) *
                      std::sqrt(ch.hbar / (2.0 * ch.mass * modes.real_frequencies()[k]));
    a2 += ak * ak;
    aw += ak * w[k];
  }
  const double expected = a2 + 2.0 * std::norm(aw);
  double zmax = 0.0;
  std::string var = "time,variance,expected\n";
  for (std::size_t f = 0; f < run.history.frames.size(); ++f) {
    double s2 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double u = run.history.coordinate(f, i, 0);
      s2 += u * u;
      s4 += u * u * u * u;
    }
    s2 /= static_cast<double>(m);
    s4 /= static_cast<double>(m);
    zmax = std::max(zmax, std::abs(s2 - expected) / std::sqrt((s4 - s2 * s2) / static_cast<double>(m)));
    var += csv_row({run.history.times[f], s2, expected});
  }
  r.metric("stationary_max_z", zmax);
  r.check("stationary_variance", zmax, "<", checks.number("stationary_z_max"), "Gaussian moment identity");
  r.capped(run.capped_evaluations);
  const auto state = OnePhononState::gaussian_packet(normal_modes(cfg.chain), cfg.j0, cfg.sigma_j, cfg.x0);
  closed_form_conservation(r, coefficient_norm_error(state.coefficients()), checks);

  std::string csv = "time,interpretation,position\n";
  for (std::size_t f = 0; f < cmp.times.size(); ++f) {
    csv += format_double(cmp.times[f]) + ",1," + format_double(cmp.quasiparticle[f]) + "\n";
    csv += format_double(cmp.times[f]) + ",2," + format_double(cmp.kinetic_centroid[f]) + "\n";
  }
  r.file("comparison.csv", csv);
  TrajectoryHistory atoms;
  atoms.dims = cmp.atoms.history.dims;
  const std::size_t keep = std::min<std::size_t>(p.count("history_trajectories"), cfg.ensemble_size);
  atoms.times = cmp.atoms.history.times;
  for (const auto& frame : cmp.atoms.history.frames) {
    atoms.frames.emplace_back(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(keep * atoms.dims));
  }
  r.file("atoms.csv", history_csv(atoms));
  r.file("stationary_variance.csv", var);
}

// ---------------------------------------------------------------- boost-check

json boost_defaults() {
  return {{"experiment", "boost-check"},
          {"seed", 1u},
          {"chain", chain_defaults()},
          {"p0a", 0.1},
          {"sigma_fraction", 0.1},
          {"momenta_count", 161u},
          {"velocity", 0.5},
          {"agreement_velocity", 0.3},
          {"linear_velocities", {-0.8, 0.3, 0.9}},
          {"box", {{"widths", 3.0}, {"nx", 96u}, {"nt", 8u}}},
          {"checks", merged(json{{"residual_max", 5e-3}, {"linear_max", 1e-10}, {"agreement_factor", 2.0}}, conservation_checks())}};
}

void boost_validate(const Params& p) {
  const LatticeChain ch = chain_from(p.sub("chain"), 8);
  ch.validate(8);
  p.positive("p0a");
  p.positive("sigma_fraction");
  p.at_least("momenta_count", 2);
  const double cs = ch.sound_speed();
  for (const char* key : {"velocity", "agreement_velocity"}) {
    if (!(std::abs(p.number(key)) < cs)) p.fail(key, "boost speed must stay below the sound speed " + format_double(cs));
  }
  for (double v : p.numbers("linear_velocities")) {
    if (!(std::abs(v) < cs)) p.fail("linear_velocities", "boost speed must stay below the sound speed " + format_double(cs));
  }
  packet_box_from(p.sub("box"));
}

void boost_run(const Params& p, Report& r) {
  boost_validate(p);
  const Params checks = p.sub("checks");
  const LatticeChain ch = chain_from(p.sub("chain"), 8);
  const double cs = ch.sound_speed();
  const double p0 = p.number("p0a") / ch.spacing;
  const double sp = p.number("sigma_fraction") * p0;
  const std::size_t count = p.count("momenta_count");
  const auto box = packet_box(packet_box_from(p.sub("box")), sp, cs);
  const auto wave = gaussian_wave(ch, p0, sp, 0.0, count);
  const auto linear = gaussian_wave(ch, p0, sp, 0.0, count, Dispersion::kLinear);

  std::string csv = "dispersion,velocity,rest,boosted\n";
  const auto identity = lorentz_boost_check(wave, 0.0, cs, box, box);
  const double v = p.number("velocity");
  const auto main = lorentz_boost_check(wave, v, cs, box, box);
  const double va = p.number("agreement_velocity");
  const auto mild = lorentz_boost_check(wave, va, cs, box, box);
  csv += "lattice," + csv_row({0.0, identity.rest, identity.boosted});
  csv += "lattice," + csv_row({va, mild.rest, mild.boosted});
  csv += "lattice," + csv_row({v, main.rest, main.boosted});
  double linear_worst = 0.0;
  for (double vl : p.numbers("linear_velocities")) {
    const auto l = lorentz_boost_check(linear, vl, cs, box, box);
    linear_worst = std::max(linear_worst, l.boosted);
    csv += "linear," + csv_row({vl, l.rest, l.boosted});
  }
  const double rmax = checks.number("residual_max");
  r.metric("rest_residual", main.rest);
  r.metric("boosted_residual", main.boosted);
  r.metric("boosted_over_rest", main.boosted / main.rest);
  r.metric("boosted_over_rest_at_agreement_velocity", mild.boosted / mild.rest);
  r.check("rest_residual", main.rest, "<", rmax, "direct evaluation");
  r.check("boosted_residual", main.boosted, "<", rmax, "direct evaluation");
  r.check("identity_boost_difference", std::abs(identity.rest - identity.boosted), "==", 0.0, "v = 0 is the identity");
  r.check("linear_boosted_residual", linear_worst, "<", checks.number("linear_max"), "boost invariance of the wave equation");
  const double factor = std::max(mild.boosted / mild.rest, mild.rest / mild.boosted);
  r.check("frame_agreement", factor, "<", checks.number("agreement_factor"), "rest and boosted residuals agree");
  double qn = 0.0;
  for (const cplx& c : wave.coefficients) qn += std::norm(c);
  closed_form_conservation(r, std::abs(qn - 1.0), checks);
  r.file("boost.csv", csv);
}

// ------------------------------------------------------------------ catalog

struct Preset {
  PresetInfo info;
  std::function<json()> defaults;
  std::function<void(const Params&)> validate;
  std::function<void(const Params&, Report&)> run;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {{"free-gaussian", "guidance", "Spreading free Gaussian; trajectory histogram against |psi|^2"},
       free_gaussian_defaults, [](const Params& p) { free_gaussian_from(p); }, free_gaussian_run},
      {{"double-slit", "guidance", "Two coherent Gaussian slits in 2D; fringes and no symmetry-axis crossing"},
       double_slit_defaults, [](const Params& p) { double_slit_from(p); }, double_slit_run},
      {{"stern-gerlach", "measurement", "Spin-1/2 packet split by a spin-dependent linear potential"},
       stern_gerlach_defaults, [](const Params& p) { stern_gerlach_from(p); }, stern_gerlach_run},
      {{"two-outcome-measurement", "measurement", "Pointer coupled to a two-valued position observable"},
       two_outcome_defaults, [](const Params& p) { two_outcome_from(p); }, two_outcome_run},
      {{"entangled-pair", "guidance", "Velocity of particle 1 under displacement of particle 2"},
       entangled_defaults, [](const Params& p) { entangled_from(p); }, entangled_run},
      {{"relaxation", "equilibrium", "Coarse-grained H-function decay on a periodic square"},
       relaxation_defaults, [](const Params& p) { relaxation_from(p); }, relaxation_run},
      {{"phonon-dispersion", "phonon-lattice", "Chain dispersion, sound speed and wave-equation residuals"},
       phonon_dispersion_defaults, phonon_dispersion_validate, phonon_dispersion_run},
      {{"phonon-trajectories", "phonon-lattice", "Atom trajectories against the quasiparticle path"},
       phonon_trajectories_defaults, [](const Params& p) { comparison_from(p); }, phonon_trajectories_run},
      {{"boost-check", "phonon-lattice", "Wave-equation residual in rest and boosted frames"},
       boost_defaults, boost_validate, boost_run},
  };
  return all;
}

const Preset& preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.info.name == name) return p;
  }
  throw ConfigParse("unknown experiment '" + name + "'");
}

void merge_into(json& target, const json& user, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigParse("unknown key '" + key + "'");
    json& slot = target[it.key()];
    const json& value = it.value();
    auto mismatch = [&](const char* want) { throw ConfigParse("key '" + key + "' must be " + want); };
    std::function<void(const json&, const json&)> check_like = [&](const json& proto, const json& v) {
      if (proto.is_boolean() && !v.is_boolean()) mismatch("a boolean");
      if (proto.is_string() && !v.is_string()) mismatch("a string");
      if (proto.is_number_unsigned() && !(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)))
        mismatch("a non-negative integer");
      if (proto.is_number_integer() && !proto.is_number_unsigned() && !v.is_number_integer()) mismatch("an integer");
      if (proto.is_number_float() && !v.is_number()) mismatch("a number");
      if (proto.is_array()) {
        if (!v.is_array()) mismatch("an array");
        if (!proto.empty()) {
          for (const auto& e : v) check_like(proto.front(), e);
        }
      }
    };
    if (slot.is_object()) {
      if (!value.is_object()) mismatch("an object");
      merge_into(slot, value, key);
      continue;
    }
    check_like(slot, value);
    if (slot.is_number_float()) slot = value.get<double>();
    else if (slot.is_number_unsigned()) slot = value.get<std::uint64_t>();
    else slot = value;
  }
}

}  // namespace

json to_json(const OutcomeStatistics& s) {
  json j = {{"eigenvalues", s.eigenvalues}, {"counts", s.counts},   {"frequencies", s.frequencies},
            {"targets", s.targets},         {"unassigned", s.unassigned}, {"total", s.total}};
  if (s.overlap) {
    json rows = json::array();
    for (std::size_t i = 0; i < s.overlap->size(); ++i) {
      json row = json::array();
      for (std::size_t k = 0; k < s.overlap->size(); ++k) row.push_back((*s.overlap)(i, k));
      rows.push_back(row);
    }
    j["overlap"] = {{"outcomes", s.overlap->outcomes}, {"matrix", rows}};
  }
  return j;
}

const std::vector<PresetInfo>& list_experiments() {
  static const std::vector<PresetInfo> infos = [] {
    std::vector<PresetInfo> v;
    for (const auto& p : presets()) v.push_back(p.info);
    return v;
  }();
  return infos;
}

json default_config(const std::string& experiment) { return preset(experiment).defaults(); }

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParse("cannot read config file " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigParse(path.string() + ": " + e.what());
  }
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigParse("override must look like key=value, got '" + std::string(assignment) + "'");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigParse("empty path segment in override key '" + key + "'");
    if (!node->is_object()) throw ConfigParse("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json resolve_config(const json& user) {
  if (!user.is_object()) throw ConfigParse("config must be a JSON object");
  if (!user.contains("experiment") || !user["experiment"].is_string()) {
    throw ConfigParse("config needs a string 'experiment' naming a preset");
  }
  json resolved = default_config(user["experiment"].get<std::string>());
  merge_into(resolved, user, "");
  return resolved;
}

void validate_config(const json& resolved) {
  preset(resolved.at("experiment").get<std::string>()).validate(Params(resolved));
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("HashFailure", "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::filesystem::path default_output_dir(const json& resolved) {
  const char* root = std::getenv("BOHMSIM_OUT_ROOT");
  const std::filesystem::path base = root && *root ? root : "runs";
  return base / (resolved.at("experiment").get<std::string>() + "-seed" + std::to_string(resolved.at("seed").get<std::uint64_t>()));
}

RunArtifacts run_experiment(const json& resolved, const std::filesystem::path& out_dir) {
  const Preset& pre = preset(resolved.at("experiment").get<std::string>());
  const Params params(resolved);
  pre.validate(params);
  Report report;
  pre.run(params, report);

  RunArtifacts art;
  art.directory = out_dir;
  art.checks = report.checks();
  art.passed = std::all_of(art.checks.begin(), art.checks.end(), [](const CheckResult& c) { return c.passed; });

  json checks = json::array();
  for (const auto& c : art.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"relation", c.relation},
                      {"threshold", c.threshold},
                      {"passed", c.passed},
                      {"oracle", c.oracle}});
  }
  json files = json::array();
  for (const auto& [name, content] : report.files()) files.push_back(name);
  art.summary = {{"experiment", pre.info.name},
                 {"module", pre.info.module},
                 {"seed", resolved.at("seed")},
                 {"versions", {{"bohmsim", BOHMSIM_VERSION}, {"compiler", __VERSION__}}},
                 {"passed", art.passed},
                 {"checks", checks},
                 {"metrics", report.metrics()},
                 {"capped_evaluations", report.capped_total()},
                 {"files", files}};

  std::vector<std::pair<std::string, std::string>> out = {{"config.json", resolved.dump(2) + "\n"}};
  for (const auto& f : report.files()) out.push_back(f);
  out.emplace_back("summary.json", art.summary.dump(2) + "\n");
  std::sort(out.begin(), out.end());

  std::filesystem::create_directories(out_dir);
  std::string manifest;
  for (const auto& [name, content] : out) {
    std::ofstream f(out_dir / name, std::ios::binary);
    f << content;
    if (!f) throw Error("OutputFailure", "cannot write " + (out_dir / name).string());
    const std::string hash = sha256_hex(content);
    art.manifest.emplace_back(name, hash);
    manifest += hash + "  " + name + "\n";
  }
  std::ofstream m(out_dir / "manifest.sha256", std::ios::binary);
  m << manifest;
  if (!m) throw Error("OutputFailure", "cannot write the manifest");
  return art;
}

}  // namespace bohm
