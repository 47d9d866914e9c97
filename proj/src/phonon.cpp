#include "bohm/phonon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "bohm/errors.hpp"
#include "bohm/io.hpp"
#include "bohm/rng.hpp"

namespace bohm {

namespace {

constexpr double kNodeFraction = 1e-12;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void LatticeChain::validate(std::size_t min_atoms) const {
  if (atoms < min_atoms || atoms % 2 != 0) {
    throw InvalidArgument("atom count must be even and at least " + std::to_string(min_atoms) + ", got " +
                          std::to_string(atoms));
  }
  if (!(mass > 0.0) || !(spring > 0.0) || !(spacing > 0.0) || !(hbar > 0.0)) {
    throw InvalidArgument("mass, spring, spacing and hbar must be positive");
  }
}

double LatticeChain::sound_speed() const { return spacing * std::sqrt(spring / mass); }

double lattice_frequency(const LatticeChain& chain, double p) {
  return 2.0 * std::sqrt(chain.spring / chain.mass) * std::abs(std::sin(0.5 * p * chain.spacing));
}

PhononModeSet::PhononModeSet(const LatticeChain& chain) : chain_(chain) {
  chain_.validate();
  const std::size_t n = chain_.atoms;
  const double nd = static_cast<double>(n);
  real_modes_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  real_frequencies_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    real_modes_(static_cast<Eigen::Index>(i), 0) = 1.0 / std::sqrt(nd);
    real_modes_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) =
        (i % 2 == 0 ? 1.0 : -1.0) / std::sqrt(nd);
  }
  real_frequencies_[n - 1] = lattice_frequency(chain_, std::numbers::pi / chain_.spacing);
  for (std::size_t j = 1; j < n / 2; ++j) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / nd;
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = theta * static_cast<double>(i);
      real_modes_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j - 1)) = std::sqrt(2.0 / nd) * std::cos(phase);
      real_modes_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j)) = std::sqrt(2.0 / nd) * std::sin(phase);
    }
    const double w = lattice_frequency(chain_, theta / chain_.spacing);
    real_frequencies_[2 * j - 1] = w;
    real_frequencies_[2 * j] = w;
  }
}

std::size_t PhononModeSet::index_of(int j) const {
  const int half = static_cast<int>(chain_.atoms / 2);
  if (j <= -half || j > half) throw InvalidArgument("momentum index " + std::to_string(j) + " outside the zone");
  return static_cast<std::size_t>(j + half - 1);
}

int PhononModeSet::momentum_index(std::size_t k) const {
  return static_cast<int>(k) - static_cast<int>(chain_.atoms / 2) + 1;
}

double PhononModeSet::momentum(std::size_t k) const {
  return 2.0 * std::numbers::pi * momentum_index(k) / (static_cast<double>(chain_.atoms) * chain_.spacing);
}

double PhononModeSet::frequency(std::size_t k) const {
  return momentum_index(k) == 0 ? 0.0 : lattice_frequency(chain_, momentum(k));
}

PhononModeSet normal_modes(const LatticeChain& chain) { return PhononModeSet(chain); }

std::vector<double> dense_chain_frequencies(const LatticeChain& chain) {
  chain.validate();
  const auto n = static_cast<Eigen::Index>(chain.atoms);
  const double k = chain.spring / chain.mass;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) += 2.0 * k;
    d(i, (i + 1) % n) -= k;
    d(i, (i + n - 1) % n) -= k;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::sqrt(std::max(es.eigenvalues()(i), 0.0));
  return out;
}

double sound_speed_estimate(const PhononModeSet& modes) {
  if (modes.size() < 6) throw InvalidArgument("sound speed estimate needs at least 6 atoms");
  const std::size_t k1 = modes.index_of(1), k2 = modes.index_of(2);
  const double f1 = modes.frequency(k1) / modes.momentum(k1);
  const double f2 = modes.frequency(k2) / modes.momentum(k2);
  return (4.0 * f1 - f2) / 3.0;
}

OnePhononState OnePhononState::vacuum(const PhononModeSet& modes) {
  OnePhononState s;
  s.c_.assign(modes.size(), 0.0);
  s.vacuum_ = true;
  return s;
}

OnePhononState OnePhononState::single_mode(const PhononModeSet& modes, int j, cplx c) {
  if (j == 0) throw InvalidArgument("the zero mode carries no phonon");
  std::vector<cplx> v(modes.size(), 0.0);
  v[modes.index_of(j)] = c / std::abs(c);
  return from_coefficients(modes, std::move(v));
}

OnePhononState OnePhononState::from_coefficients(const PhononModeSet& modes, std::vector<cplx> c) {
  if (c.size() != modes.size()) throw InvalidArgument("need one coefficient per lattice mode");
  if (c[modes.zero_mode()] != 0.0) throw InvalidArgument("the zero mode coefficient must be 0");
  double n = 0.0;
  for (const cplx& z : c) n += std::norm(z);
  OnePhononState s;
  s.c_ = std::move(c);
  if (n == 0.0) {
    s.vacuum_ = true;
    return s;
  }
  if (std::abs(n - 1.0) > 1e-12) throw InvalidArgument("phonon coefficients must satisfy sum |c|^2 = 1, got " + format_double(n));
  s.vacuum_ = false;
  return s;
}

OnePhononState OnePhononState::gaussian_packet(const PhononModeSet& modes, double j0, double s, double x0) {
  if (!(s > 0.0)) throw InvalidArgument("packet width must be positive");
  std::vector<cplx> c(modes.size(), 0.0);
  double n = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const int j = modes.momentum_index(k);
    if (j == 0) continue;
    const double d = j - j0;
    c[k] = std::exp(-d * d / (4.0 * s * s)) * std::polar(1.0, -modes.momentum(k) * x0);
    n += std::norm(c[k]);
  }
  if (n == 0.0) throw InvalidArgument("packet has no weight on nonzero modes");
  for (cplx& z : c) z /= std::sqrt(n);
  return from_coefficients(modes, std::move(c));
}

OnePhononField::OnePhononField(const PhononModeSet& modes, OnePhononState state)
    : modes_(modes), state_(std::move(state)) {
  const LatticeChain& ch = modes_.chain();
  const double nd = static_cast<double>(ch.atoms);
  weights_.assign(ch.atoms, 0.0);
  for (std::size_t k = 0; k < ch.atoms; ++k) {
    const double w = modes_.frequency(k);
    weights_[k] = state_.coefficients()[k] * std::sqrt(2.0 * ch.mass * w / (nd * ch.hbar));
  }
  mode_scale_.assign(ch.atoms, 0.0);
  for (std::size_t k = 1; k < ch.atoms; ++k) {
    mode_scale_[k] = std::sqrt(ch.hbar / (2.0 * ch.mass * modes_.real_frequencies()[k]));
  }
  double largest = 0.0;
  for (const cplx& w : weights_) largest = std::max(largest, std::abs(w));
  for (std::size_t k = 0; k < ch.atoms; ++k) {
    if (std::abs(weights_[k]) > 1e-17 * largest) active_.push_back(k);
  }
  // <|F|^2> over the vacuum is time independent.
  double scale = 0.0;
  for (const cplx& w : normal_weights(0.0)) scale += std::norm(w);
  node_threshold_ = kNodeFraction * scale;
}

std::vector<cplx> OnePhononField::gradient(double t) const {
  const std::size_t n = atoms();
  std::vector<cplx> g(n, 0.0);
  if (state_.is_vacuum()) return g;
  const double a = modes_.chain().spacing;
  for (std::size_t k : active_) {
    const cplx wt = weights_[k] * std::polar(1.0, -modes_.frequency(k) * t);
    const double p = modes_.momentum(k);
    for (std::size_t i = 0; i < n; ++i) g[i] += wt * std::polar(1.0, p * static_cast<double>(i) * a);
  }
  return g;
}

cplx OnePhononField::prefactor(std::span<const double> u, double t) const {
  if (u.size() != atoms()) throw InvalidArgument("need one displacement per atom");
  if (state_.is_vacuum()) return 1.0;
  const auto g = gradient(t);
  cplx f = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) f += u[i] * g[i];
  return f;
}

Eigen::VectorXd OnePhononField::mode_coordinates(std::span<const double> u) const {
  if (u.size() != atoms()) throw InvalidArgument("need one displacement per atom");
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
  return modes_.real_modes().transpose() * uv;
}

cplx OnePhononField::amplitude(std::span<const double> u, double t) const {
  const LatticeChain& ch = modes_.chain();
  const auto q = mode_coordinates(u);
  double log_psi0 = 0.0, e0 = 0.0;
  for (std::size_t k = 1; k < atoms(); ++k) {
    const double w = modes_.real_frequencies()[k];
    const double qk = q(static_cast<Eigen::Index>(k));
    log_psi0 += 0.25 * std::log(ch.mass * w / (std::numbers::pi * ch.hbar)) - ch.mass * w * qk * qk / (2.0 * ch.hbar);
    e0 += 0.5 * ch.hbar * w;
  }
  return prefactor(u, t) * std::exp(log_psi0) * std::polar(1.0, -e0 * t / ch.hbar);
}

std::vector<double> OnePhononField::velocities(std::span<const double> u, double t) const {
  if (state_.is_vacuum()) {
    if (u.size() != atoms()) throw InvalidArgument("need one displacement per atom");
    return std::vector<double>(atoms(), 0.0);
  }
  const auto g = gradient(t);
  return velocities(u, g);
}

std::vector<double> OnePhononField::velocities(std::span<const double> u, std::span<const cplx> g) const {
  if (u.size() != atoms() || g.size() != atoms()) throw InvalidArgument("need one displacement per atom");
  std::vector<double> v(atoms(), 0.0);
  if (state_.is_vacuum()) return v;
  cplx f = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) f += u[i] * g[i];
  if (std::norm(f) < node_threshold_) throw NodalPoint("configuration lies on a node of the one-phonon wavefunction");
  const LatticeChain& ch = modes_.chain();
  const cplx inv = 1.0 / f;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ch.hbar / ch.mass * (g[i] * inv).imag();
  return v;
}

double OnePhononField::relative_current_divergence(std::span<const double> u, double t) const {
  const auto v = velocities(u, t);
  if (state_.is_vacuum()) return 0.0;
  const LatticeChain& ch = modes_.chain();
  const auto g = gradient(t);
  cplx f = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) f += u[i] * g[i];
  // d ln Psi0^2 / du_n = -(2 m / hbar) sum_k omega_k Q_k E_nk.
  const auto q = mode_coordinates(u);
  Eigen::VectorXd wq(static_cast<Eigen::Index>(atoms()));
  wq(0) = 0.0;
  for (std::size_t k = 1; k < atoms(); ++k) {
    wq(static_cast<Eigen::Index>(k)) = modes_.real_frequencies()[k] * q(static_cast<Eigen::Index>(k));
  }
  const Eigen::VectorXd dlog0 = -(2.0 * ch.mass / ch.hbar) * (modes_.real_modes() * wq);
  double div = 0.0;
  for (std::size_t i = 0; i < atoms(); ++i) {
    const cplx r = g[i] / f;
    const double dv = ch.hbar / ch.mass * (-r * r).imag();
    const double dlog = 2.0 * r.real() + dlog0(static_cast<Eigen::Index>(i));
    div += dv + v[i] * dlog;
  }
  return div;
}

std::vector<cplx> OnePhononField::normal_weights(double t) const {
  const std::size_t n = atoms();
  std::vector<cplx> w(n, 0.0);
  if (state_.is_vacuum()) return w;
  const auto g = gradient(t);
  const Eigen::MatrixXd& e = modes_.real_modes();
  for (std::size_t k = 1; k < n; ++k) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * g[i];
    w[k] = s * mode_scale_[k];
  }
  return w;
}

TrajectorySet OnePhononField::sample(std::size_t count, std::uint64_t seed, double t,
                                     std::uint64_t stream_offset) const {
  if (count == 0) throw InvalidArgument("ensemble size must be at least 1");
  const std::size_t n = atoms();
  const auto w = normal_weights(t);
  // F = w . z with w = a + i b; |F|^2 phi(z) is an equal mixture, weighted by
  // |a|^2 and |b|^2, of (a_hat . z)^2 phi(z) and (b_hat . z)^2 phi(z).
  Eigen::VectorXd re(static_cast<Eigen::Index>(n)), im(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    re(static_cast<Eigen::Index>(k)) = w[k].real();
    im(static_cast<Eigen::Index>(k)) = w[k].imag();
  }
  const double ra = re.squaredNorm(), rb = im.squaredNorm();
  const bool vacuum = state_.is_vacuum() || ra + rb == 0.0;
  const Eigen::VectorXd a_hat = ra > 0.0 ? Eigen::VectorXd(re / std::sqrt(ra)) : re;
  const Eigen::VectorXd b_hat = rb > 0.0 ? Eigen::VectorXd(im / std::sqrt(rb)) : im;
  const double p_a = vacuum ? 0.0 : ra / (ra + rb);

  TrajectorySet out;
  out.dims = n;
  out.positions.resize(count * n);
  out.time = t;
  out.seed = seed;
  out.stream_offset = stream_offset;
  const Eigen::MatrixXd& e = modes_.real_modes();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < count; ++i) {
    auto gen = make_stream(seed, stream_offset + i);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    z(0) = 0.0;
    for (std::size_t k = 1; k < n; ++k) z(static_cast<Eigen::Index>(k)) = normal(gen);
    if (!vacuum) {
      const Eigen::VectorXd& d = uniform01(gen) < p_a ? a_hat : b_hat;
      double chi2 = 0.0;
      for (int r = 0; r < 3; ++r) {
        const double x = normal(gen);
        chi2 += x * x;
      }
      const double s = (uniform01(gen) < 0.5 ? -1.0 : 1.0) * std::sqrt(chi2);
      z += (s - d.dot(z)) * d;
    }
    Eigen::VectorXd q(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) q(static_cast<Eigen::Index>(k)) = z(static_cast<Eigen::Index>(k)) * mode_scale_[k];
    const Eigen::VectorXd u = e * q;
    for (std::size_t k = 0; k < n; ++k) out.positions[i * n + k] = u(static_cast<Eigen::Index>(k));
  }
  return out;
}

double OnePhononField::displacement_cdf(std::size_t n, double t, double x) const {
  if (n >= atoms()) throw InvalidArgument("atom index out of range");
  // u_n = c . z with c_k = E_nk scale_k; along c_hat the density is
  // phi(s) (1 + alpha (s^2 - 1)), alpha = |w . c_hat|^2, so the CDF is
  // Phi(s) - alpha s phi(s).
  Eigen::VectorXd c(static_cast<Eigen::Index>(atoms()));
  for (std::size_t k = 0; k < atoms(); ++k) {
    c(static_cast<Eigen::Index>(k)) = modes_.real_modes()(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) * mode_scale_[k];
  }
  const double norm = c.norm();
  const auto w = normal_weights(t);
  cplx proj = 0.0;
  for (std::size_t k = 0; k < atoms(); ++k) proj += w[k] * c(static_cast<Eigen::Index>(k)) / norm;
  const double alpha = state_.is_vacuum() ? 0.0 : std::norm(proj);
  const double s = x / norm;
  const double phi = std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * std::erfc(-s / std::sqrt(2.0)) - alpha * s * phi;
}

AtomRun integrate_atoms(const OnePhononField& field, TrajectorySet traj, double t_final, double dt,
                        std::size_t record_stride, double speed_cap) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (record_stride == 0) throw InvalidArgument("record_stride must be at least 1");
  const std::size_t n = field.atoms();
  if (traj.dims != n) throw GridMismatch("trajectory dimension differs from the atom count");
  AtomRun run;
  run.history.dims = n;
  run.history.record(traj);
  const std::size_t m = traj.size();
  std::uint64_t capped = 0;

  auto velocity = [&](std::span<const double> u, std::span<const cplx> g, std::vector<double>& out,
                      std::uint64_t& c) {
    try {
      out = field.velocities(u, g);
      double s = 0.0;
      for (double x : out) s += x * x;
      s = std::sqrt(s);
      if (s > speed_cap) {
        for (double& x : out) x *= speed_cap / s;
        ++c;
      }
    } catch (const NodalPoint&) {
      std::fill(out.begin(), out.end(), 0.0);
      ++c;
    }
  };

  std::size_t step = 0;
  while (traj.time < t_final) {
    const double h = std::min(dt, t_final - traj.time);
    const double t = traj.time;
    const auto g0 = field.gradient(t), g1 = field.gradient(t + 0.5 * h), g2 = field.gradient(t + h);
#pragma omp parallel for schedule(static) reduction(+ : capped)
    for (std::size_t i = 0; i < m; ++i) {
      std::span<double> x(traj.positions.data() + i * n, n);
      std::vector<double> k1(n), k2(n), k3(n), k4(n), y(n);
      std::uint64_t c = 0;
      velocity(x, g0, k1, c);
      for (std::size_t a = 0; a < n; ++a) y[a] = x[a] + 0.5 * h * k1[a];
      velocity(y, g1, k2, c);
      for (std::size_t a = 0; a < n; ++a) y[a] = x[a] + 0.5 * h * k2[a];
      velocity(y, g1, k3, c);
      for (std::size_t a = 0; a < n; ++a) y[a] = x[a] + h * k3[a];
      velocity(y, g2, k4, c);
      for (std::size_t a = 0; a < n; ++a) x[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
      capped += c;
    }
    traj.time = (t_final - t <= dt) ? t_final : t + h;
    if (++step % record_stride == 0 || traj.time >= t_final) run.history.record(traj);
  }
  traj.capped_evaluations += capped;
  run.capped_evaluations = capped;
  run.final = std::move(traj);
  return run;
}

double QuasiparticleWave::omega(double p) const {
  if (dispersion == Dispersion::kLinear) return sound_speed * std::abs(p);
  return 2.0 * sound_speed / spacing * std::abs(std::sin(0.5 * p * spacing));
}

double QuasiparticleWave::group_velocity(double p) const {
  if (dispersion == Dispersion::kLinear) return sound_speed * sgn(p);
  return sound_speed * std::cos(0.5 * p * spacing) * sgn(std::sin(0.5 * p * spacing));
}

cplx QuasiparticleWave::value(double x, double t) const {
  cplx s = 0.0;
  for (std::size_t i = 0; i < momenta.size(); ++i) {
    s += coefficients[i] * std::polar(1.0, momenta[i] * x - omega(momenta[i]) * t);
  }
  return s;
}

cplx QuasiparticleWave::velocity_operator(double x, double t) const {
  cplx s = 0.0;
  for (std::size_t i = 0; i < momenta.size(); ++i) {
    s += coefficients[i] * group_velocity(momenta[i]) * std::polar(1.0, momenta[i] * x - omega(momenta[i]) * t);
  }
  return s;
}

QuasiparticleWave quasiparticle_wave(const OnePhononState& state, const PhononModeSet& modes) {
  QuasiparticleWave w;
  w.sound_speed = modes.chain().sound_speed();
  w.spacing = modes.chain().spacing;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (state.coefficients()[k] == 0.0) continue;
    w.momenta.push_back(modes.momentum(k));
    w.coefficients.push_back(state.coefficients()[k]);
  }
  return w;
}

QuasiparticleWave single_mode_wave(const LatticeChain& chain, double p, Dispersion d) {
  QuasiparticleWave w;
  w.sound_speed = chain.sound_speed();
  w.spacing = chain.spacing;
  w.dispersion = d;
  w.momenta = {p};
  w.coefficients = {1.0};
  return w;
}

QuasiparticleWave gaussian_wave(const LatticeChain& chain, double p0, double sigma_p, double x0,
                                std::size_t count, Dispersion d) {
  if (!(sigma_p > 0.0) || count < 2) throw InvalidArgument("packet needs sigma_p > 0 and at least two momenta");
  QuasiparticleWave w;
  w.sound_speed = chain.sound_speed();
  w.spacing = chain.spacing;
  w.dispersion = d;
  double n = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = p0 + sigma_p * (-6.0 + 12.0 * static_cast<double>(i) / static_cast<double>(count - 1));
    const double dp = p - p0;
    const cplx c = std::exp(-dp * dp / (4.0 * sigma_p * sigma_p)) * std::polar(1.0, -p * x0);
    w.momenta.push_back(p);
    w.coefficients.push_back(c);
    n += std::norm(c);
  }
  for (cplx& c : w.coefficients) c /= std::sqrt(n);
  return w;
}

double frame_residual(const QuasiparticleWave& wave, double v, double c, const SampleBox& box) {
  if (!(c > 0.0)) throw InvalidArgument("speed parameter must be positive");
  if (std::abs(v) >= c) throw SuperluminalBoost("boost speed " + format_double(v) + " is not below " + format_double(c));
  if (box.nx < 1 || box.nt < 1) throw InvalidArgument("sample box needs at least one point per axis");
  const double beta = v / c;
  const double gamma = 1.0 / std::sqrt(1.0 - beta * beta);
  // A mode e^{i(p x - w t)} reads e^{i(p' x' - w' t')} in the moving frame.
  std::vector<double> p_b(wave.momenta.size()), w_b(wave.momenta.size()), w_r(wave.momenta.size());
  for (std::size_t i = 0; i < wave.momenta.size(); ++i) {
    const double p = wave.momenta[i];
    w_r[i] = wave.omega(p);
    p_b[i] = gamma * (p - v * w_r[i] / (c * c));
    w_b[i] = gamma * (w_r[i] - v * p);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t it = 0; it < box.nt; ++it) {
    const double tb = box.nt == 1 ? box.t_min
                                  : box.t_min + (box.t_max - box.t_min) * static_cast<double>(it) / static_cast<double>(box.nt - 1);
    for (std::size_t ix = 0; ix < box.nx; ++ix) {
      const double xb = (box.nx == 1 ? box.x_min
                                     : box.x_min + (box.x_max - box.x_min) * static_cast<double>(ix) / static_cast<double>(box.nx - 1)) +
                        box.drift * tb;
      const double x = gamma * (xb + v * tb);
      const double t = gamma * (tb + v * xb / (c * c));
      cplx dtt = 0.0, dxx = 0.0;
      for (std::size_t i = 0; i < wave.momenta.size(); ++i) {
        const cplx e = wave.coefficients[i] * std::polar(1.0, wave.momenta[i] * x - w_r[i] * t);
        dtt -= w_b[i] * w_b[i] * e;
        dxx -= p_b[i] * p_b[i] * e;
      }
      num += std::norm(dtt / (c * c) - dxx);
      den += std::norm(dxx);
    }
  }
  if (den == 0.0) throw InvalidArgument("wave has no curvature in the sample box");
  return std::sqrt(num / den);
}

double wave_equation_residual(const QuasiparticleWave& wave, const SampleBox& box, double c) {
  return frame_residual(wave, 0.0, c, box);
}

BoostResiduals lorentz_boost_check(const QuasiparticleWave& wave, double v, double c,
                                   const SampleBox& rest_box, const SampleBox& boosted_box) {
  if (std::abs(v) >= c) throw SuperluminalBoost("boost speed " + format_double(v) + " is not below " + format_double(c));
  return {frame_residual(wave, 0.0, c, rest_box), frame_residual(wave, v, c, boosted_box)};
}

QuasiparticlePath interpretation1_trajectory(const QuasiparticleWave& wave, double x0, double t0,
                                             double t_final, double dt, double speed_cap) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  double total = 0.0;
  for (const cplx& c : wave.coefficients) total += std::abs(c);
  const double node = kNodeFraction * total * total;
  QuasiparticlePath path;
  auto vel = [&](double x, double t) {
    const cplx psi = wave.value(x, t);
    const double rho = std::norm(psi);
    if (rho < node) {
      ++path.capped_evaluations;
      return 0.0;
    }
    const double v = (std::conj(psi) * wave.velocity_operator(x, t)).real() / rho;
    if (std::abs(v) > speed_cap) {
      ++path.capped_evaluations;
      return std::copysign(speed_cap, v);
    }
    return v;
  };
  double x = x0, t = t0;
  path.times.push_back(t);
  path.positions.push_back(x);
  while (t < t_final) {
    const double h = std::min(dt, t_final - t);
    const double k1 = vel(x, t);
    const double k2 = vel(x + 0.5 * h * k1, t + 0.5 * h);
    const double k3 = vel(x + 0.5 * h * k2, t + 0.5 * h);
    const double k4 = vel(x + h * k3, t + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (t_final - t <= dt) ? t_final : t + h;
    path.times.push_back(t);
    path.positions.push_back(x);
  }
  return path;
}

InterpretationComparison compare_interpretations(const ComparisonConfig& cfg) {
  const PhononModeSet modes(cfg.chain);
  const auto state = OnePhononState::gaussian_packet(modes, cfg.j0, cfg.sigma_j, cfg.x0);
  const OnePhononField field(modes, state);
  const auto wave = quasiparticle_wave(state, modes);
  const double a = cfg.chain.spacing;
  const std::size_t n = cfg.chain.atoms;

  InterpretationComparison out;
  out.atoms = integrate_atoms(field, field.sample(cfg.ensemble_size, cfg.seed, 0.0), cfg.duration, cfg.dt,
                              cfg.record_stride);
  const auto& hist = out.atoms.history;
  const std::size_t n_mid = static_cast<std::size_t>(
      std::llround(cfg.x0 / a + 0.5 * cfg.duration * wave.group_velocity(2.0 * std::numbers::pi * cfg.j0 / (n * a)) / a)) % n;
  std::vector<double> prev_sign(cfg.ensemble_size, 0.0);
  for (std::size_t f = 0; f < hist.frames.size(); ++f) {
    const double t = hist.times[f];
    std::vector<double> energy(n, 0.0);
    const auto g = field.gradient(t);
    for (std::size_t i = 0; i < cfg.ensemble_size; ++i) {
      const std::span<const double> u(hist.frames[f].data() + i * n, n);
      std::vector<double> v;
      try {
        v = field.velocities(u, g);
      } catch (const NodalPoint&) {
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) energy[k] += v[k] * v[k];
      const double s = sgn(v[n_mid]);
      if (s != 0.0 && prev_sign[i] != 0.0 && s != prev_sign[i]) ++out.atom_sign_changes;
      if (s != 0.0) prev_sign[i] = s;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num += static_cast<double>(k) * a * energy[k];
      den += energy[k];
    }
    out.times.push_back(t);
    out.kinetic_centroid.push_back(num / den);
  }
  const auto path = interpretation1_trajectory(wave, cfg.x0, 0.0, cfg.duration, cfg.dt);
  // Sample X(t) at the recorded frame times (the atom history uses the same steps).
  for (double t : out.times) {
    const auto it = std::lower_bound(path.times.begin(), path.times.end(), t - 1e-9);
    out.quasiparticle.push_back(path.positions[static_cast<std::size_t>(it - path.times.begin())]);
  }
  for (std::size_t i = 2; i < path.positions.size(); ++i) {
    const double d0 = path.positions[i - 1] - path.positions[i - 2];
    const double d1 = path.positions[i] - path.positions[i - 1];
    if (sgn(d0) != 0.0 && sgn(d1) != 0.0 && sgn(d0) != sgn(d1)) ++out.quasiparticle_sign_changes;
  }
  return out;
}

}  // namespace bohm
