#pragma once

#include <complex>
#include <limits>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "bohm/guidance.hpp"

namespace bohm {

using cplx = std::complex<double>;

/// Periodic 1D harmonic chain with nearest-neighbour springs.
struct LatticeChain {
  std::size_t atoms = 8;
  double mass = 1.0;
  double spring = 1.0;
  double spacing = 1.0;
  double hbar = 1.0;

  /// Throws InvalidArgument unless atoms >= min_atoms is even and the
  /// parameters are positive.
  void validate(std::size_t min_atoms = 2) const;
  /// a sqrt(kappa / m).
  double sound_speed() const;
};

/// omega(p) = 2 sqrt(kappa / m) |sin(p a / 2)|, for any real p.
double lattice_frequency(const LatticeChain& chain, double p);

/// Lattice momenta p_j = 2 pi j / (N a), j = -N/2+1 .. N/2, with their
/// frequencies and a real orthonormal mode basis.
class PhononModeSet {
 public:
  explicit PhononModeSet(const LatticeChain& chain);

  const LatticeChain& chain() const { return chain_; }
  std::size_t size() const { return chain_.atoms; }
  /// Mode index k in [0, N) for momentum index j.
  std::size_t index_of(int j) const;
  int momentum_index(std::size_t k) const;
  double momentum(std::size_t k) const;
  double frequency(std::size_t k) const;
  std::size_t zero_mode() const { return index_of(0); }

  /// N x N orthonormal columns: the uniform mode, then cos/sin pairs for
  /// j = 1 .. N/2-1, then the alternating mode j = N/2.
  const Eigen::MatrixXd& real_modes() const { return real_modes_; }
  /// Frequency of each real mode column.
  const std::vector<double>& real_frequencies() const { return real_frequencies_; }

 private:
  LatticeChain chain_;
  Eigen::MatrixXd real_modes_;
  std::vector<double> real_frequencies_;
};

PhononModeSet normal_modes(const LatticeChain& chain);

/// Ascending frequencies from a dense diagonalization of the periodic
/// dynamical matrix (the zero mode is reported as sqrt(max(lambda, 0))).
std::vector<double> dense_chain_frequencies(const LatticeChain& chain);

/// Sound speed from the two smallest nonzero lattice momenta with one
/// Richardson step: c = (4 f(p1) - f(p2)) / 3, f = omega / p.
double sound_speed_estimate(const PhononModeSet& modes);

/// Coefficients c_p over lattice modes (indexed like PhononModeSet); the
/// zero mode coefficient is always 0. All-zero means the vacuum.
class OnePhononState {
 public:
  static OnePhononState vacuum(const PhononModeSet& modes);
  static OnePhononState single_mode(const PhononModeSet& modes, int j, cplx c = 1.0);
  /// Checks sum |c|^2 = 1 within 1e-12 and c_0 = 0.
  static OnePhononState from_coefficients(const PhononModeSet& modes, std::vector<cplx> c);
  /// c_j ~ exp(-(j - j0)^2 / (4 s^2)) exp(-i p_j x0) over nonzero modes, normalized.
  static OnePhononState gaussian_packet(const PhononModeSet& modes, double j0, double s, double x0);

  const std::vector<cplx>& coefficients() const { return c_; }
  bool is_vacuum() const { return vacuum_; }

 private:
  std::vector<cplx> c_;
  bool vacuum_ = true;
};

/// Closed-form one-phonon wavefunction over atom displacements u_n:
/// Psi(u, t) = F(u, t) Psi0(u) exp(-i E0 t / hbar) with
/// F = sum_p c_p f_p(u) exp(-i omega_p t),  f_p = sqrt(2 m omega_p / (N hbar)) sum_n u_n e^{i p n a},
/// and Psi0 the ground state of the nonzero modes (the uniform translation
/// is frozen and does not appear). F is linear in u, so dF/du_n = g_n(t).
class OnePhononField {
 public:
  OnePhononField(const PhononModeSet& modes, OnePhononState state);

  const PhononModeSet& modes() const { return modes_; }
  const OnePhononState& state() const { return state_; }
  std::size_t atoms() const { return modes_.size(); }

  /// g_n(t) = dF/du_n (independent of u).
  std::vector<cplx> gradient(double t) const;
  cplx prefactor(std::span<const double> u, double t) const;
  /// Psi(u, t).
  cplx amplitude(std::span<const double> u, double t) const;
  /// Mode coordinates Q_k of the displacements (real basis).
  Eigen::VectorXd mode_coordinates(std::span<const double> u) const;

  /// v_n = (hbar / m) Im(g_n / F); throws NodalPoint when |F|^2 < 1e-12 <|F|^2>_0.
  std::vector<double> velocities(std::span<const double> u, double t) const;
  /// Same, with g = gradient(t) precomputed (shared across an ensemble).
  std::vector<double> velocities(std::span<const double> u, std::span<const cplx> g) const;
  /// div(|Psi|^2 v) / |Psi|^2, computed analytically.
  double relative_current_divergence(std::span<const double> u, double t) const;

  /// Exact draws from |Psi(t)|^2 (zero-mode coordinate 0); trajectory i uses
  /// RNG stream stream_offset + i.
  TrajectorySet sample(std::size_t count, std::uint64_t seed, double t,
                       std::uint64_t stream_offset = 0) const;
  /// P(u_n <= x) at time t.
  double displacement_cdf(std::size_t n, double t, double x) const;
  /// Coefficients of F in standard-normal mode variables: F = w . z.
  std::vector<cplx> normal_weights(double t) const;

 private:
  PhononModeSet modes_;
  OnePhononState state_;
  std::vector<cplx> weights_;       // c_p sqrt(2 m omega_p / (N hbar))
  std::vector<double> mode_scale_;  // sqrt(hbar / (2 m omega_k)) per real mode (0 for the zero mode)
  std::vector<std::size_t> active_;  // modes with nonzero weight
  double node_threshold_ = 0.0;
};

struct AtomRun {
  TrajectoryHistory history;
  TrajectorySet final;
  std::uint64_t capped_evaluations = 0;
};

/// RK4 on the analytic velocity field from traj.time to t_final. Near nodes
/// the speed is limited to speed_cap. Every record_stride-th step is kept.
AtomRun integrate_atoms(const OnePhononField& field, TrajectorySet traj, double t_final, double dt,
                        std::size_t record_stride = 1,
                        double speed_cap = std::numeric_limits<double>::infinity());

enum class Dispersion { kLattice, kLinear };

/// psi(x, t) = sum_p c_p exp(-i (omega(p) t - p x)) over arbitrary momenta.
struct QuasiparticleWave {
  std::vector<double> momenta;
  std::vector<cplx> coefficients;
  double sound_speed = 1.0;
  double spacing = 1.0;
  Dispersion dispersion = Dispersion::kLattice;

  double omega(double p) const;
  /// d omega / dp.
  double group_velocity(double p) const;
  cplx value(double x, double t) const;
  /// sum_p c_p domega/dp e^{...}: the group-velocity operator applied to psi.
  cplx velocity_operator(double x, double t) const;
};

QuasiparticleWave quasiparticle_wave(const OnePhononState& state, const PhononModeSet& modes);
QuasiparticleWave single_mode_wave(const LatticeChain& chain, double p, Dispersion d = Dispersion::kLattice);
/// c(p) ~ exp(-(p - p0)^2 / (4 sigma_p^2)) exp(-i p x0) sampled at `count`
/// equally spaced momenta over p0 +- 6 sigma_p, normalized so sum |c|^2 = 1.
QuasiparticleWave gaussian_wave(const LatticeChain& chain, double p0, double sigma_p, double x0,
                                std::size_t count = 161, Dispersion d = Dispersion::kLattice);

/// Sample points x_i + drift * t over a rectangle of (x, t).
struct SampleBox {
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t nx = 64;
  double t_min = 0.0;
  double t_max = 10.0;
  std::size_t nt = 16;
  double drift = 0.0;
};

/// RMS |psi_tt / c^2 - psi_xx| / RMS |psi_xx| over the box, with analytic
/// derivatives, evaluated in the frame moving at speed v (boost with speed
/// parameter c). v = 0 is the rest frame.
double frame_residual(const QuasiparticleWave& wave, double v, double c, const SampleBox& box);
double wave_equation_residual(const QuasiparticleWave& wave, const SampleBox& box, double c);

struct BoostResiduals {
  double rest = 0.0;
  double boosted = 0.0;
};
/// Throws SuperluminalBoost when |v| >= c.
BoostResiduals lorentz_boost_check(const QuasiparticleWave& wave, double v, double c,
                                   const SampleBox& rest_box, const SampleBox& boosted_box);

struct QuasiparticlePath {
  std::vector<double> times;
  std::vector<double> positions;
  std::uint64_t capped_evaluations = 0;
};
/// dX/dt = Re(psi* V psi) / |psi|^2 with V the group-velocity operator.
QuasiparticlePath interpretation1_trajectory(const QuasiparticleWave& wave, double x0, double t0,
                                             double t_final, double dt,
                                             double speed_cap = std::numeric_limits<double>::infinity());

/// Interpretation 1 versus interpretation 2 on the same one-phonon packet.
struct InterpretationComparison {
  std::vector<double> times;
  std::vector<double> quasiparticle;     // X(t)
  std::vector<double> kinetic_centroid;  // sum n <v_n^2> a / sum <v_n^2>
  AtomRun atoms;
  std::size_t atom_sign_changes = 0;         // velocity sign flips of the most active atom, summed over the ensemble
  std::size_t quasiparticle_sign_changes = 0;
};

struct ComparisonConfig {
  LatticeChain chain{256};
  double j0 = 8.0;
  double sigma_j = 1.5;
  double x0 = 64.0;
  std::size_t ensemble_size = 100;
  std::uint64_t seed = 1;
  double duration = 60.0;
  double dt = 0.2;
  std::size_t record_stride = 5;
};
InterpretationComparison compare_interpretations(const ComparisonConfig& cfg);

}  // namespace bohm
