#pragma once

// Time-ordered propagation (full 5x5 lab-frame and effective SWA+RWA 4x4
// engines), frame transforms, subspace projection, Eq.-style infidelity and
// Monte-Carlo ensemble averaging over noise realizations.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "spinforge/errors.hpp"
#include "spinforge/model.hpp"
#include "spinforge/noise.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/pulse.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

enum class Frame { lab, sw, rotating };

struct Propagator {
  Eigen::MatrixXcd matrix;
  Frame frame = Frame::lab;
  double t = 0.0;

  double unitarity_error() const {
    return (matrix.adjoint() * matrix -
            Eigen::MatrixXcd::Identity(matrix.rows(), matrix.cols()))
        .cwiseAbs()
        .maxCoeff();
  }
};

struct FidelityReport {
  double infidelity = 0.0;
  double leakage = 0.0;
  Frame frame = Frame::rotating;
};

struct EnsembleResult {
  double mean_infidelity = 0.0;
  double std_error = 0.0;
  std::size_t n_realizations = 0;
  std::vector<double> per_realization;  // kept only on request
};

// I = 1 - |Tr[T^dag U]|^2 / 16; global phase of u4 drops out.
inline double infidelity(const Matrix4cd& u4, const Matrix4cd& target) {
  const std::complex<double> tr = (target.adjoint() * u4).trace();
  return 1.0 - std::norm(tr) / 16.0;
}

// Closest unitary (polar factor). Projected propagators lose norm to
// leakage; gate targets have to be exactly unitary.
inline Matrix4cd unitarize(const Matrix4cd& m) {
  Eigen::JacobiSVD<Matrix4cd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// Top-left 4x4 block and the population escaping the computational subspace.
inline std::pair<Matrix4cd, double> project_4x4(const Matrix5cd& u5) {
  const Matrix4cd block = u5.topLeftCorner<4, 4>();
  const double leakage = 1.0 - 0.25 * (block.adjoint() * block).trace().real();
  return {block, leakage};
}

inline Propagator to_rotating_frame(const Propagator& u, const SystemParams& p) {
  if (u.frame == Frame::rotating) throw ConfigError("to_rotating_frame: already rotating");
  if (u.matrix.rows() != 4) throw ConfigError("to_rotating_frame: expected a 4x4 propagator");
  Propagator out;
  out.matrix = rotating_frame_phases(p, u.t).conjugate().asDiagonal() * u.matrix;
  out.frame = Frame::rotating;
  out.t = u.t;
  return out;
}

// -------------------------------------------------------------------------
// Matrix exponential steps
// -------------------------------------------------------------------------

namespace detail {

// exp(M) for anti-Hermitian M with ||M|| << 1 (degree-8 Taylor, converged to
// machine precision for the step sizes used here).
template <typename Mat>
Mat expm_small_antiherm(const Mat& m) {
  const Mat m2 = m * m;
  const Mat m3 = m2 * m;
  const Mat m4 = m2 * m2;
  Mat p = Mat::Identity() * (1.0 / 24.0) + m * (1.0 / 120.0) + m2 * (1.0 / 720.0) +
          m3 * (1.0 / 5040.0) + m4 * (1.0 / 40320.0);
  return Mat::Identity() + m + 0.5 * m2 + (1.0 / 6.0) * m3 + m4 * p;
}

// cos(B) and sin(B) for small real symmetric B (used by the lab-frame engine
// where the Hamiltonian is purely real).
inline void cos_sin_small_sym5(const Matrix5d& b, Matrix5d& c, Matrix5d& s) {
  const Matrix5d b2 = b * b;
  Matrix5d t = Matrix5d::Identity() * (-1.0 / 720.0) + b2 * (1.0 / 40320.0);
  t = Matrix5d::Identity() * (1.0 / 24.0) + b2 * t;
  t = Matrix5d::Identity() * (-0.5) + b2 * t;
  c = Matrix5d::Identity() + b2 * t;
  Matrix5d u = Matrix5d::Identity() * (1.0 / 120.0) - b2 * (1.0 / 5040.0);
  u = Matrix5d::Identity() * (-1.0 / 6.0) + b2 * u;
  u = Matrix5d::Identity() + b2 * u;
  s = b * u;
}

inline void check_step(double max_abs_mhz, double dt, double t) {
  if (max_abs_mhz * dt * kRadPerMHzNs >= 0.1) {
    throw NumericalError("propagate: step dt=" + std::to_string(dt) +
                         " ns too coarse for frequency " + std::to_string(max_abs_mhz) +
                         " MHz at t=" + std::to_string(t) + " ns");
  }
}

}  // namespace detail

// Generic midpoint-rule time-ordered product U = prod_k exp(-i 2pi H(t_k+dt/2) dt).
// The provider returns a Hermitian matrix in MHz. Exact (diagonalization)
// exponentials; intended for moderate step counts.
template <typename Provider>
Propagator propagate(Provider&& hamiltonian_at, double t_f, double dt,
                     Frame frame = Frame::lab) {
  if (!(dt > 0.0) || !(t_f >= 0.0)) throw ConfigError("propagate: bad time arguments");
  const auto n = static_cast<std::size_t>(std::llround(t_f / dt));
  Eigen::MatrixXcd u;
  for (std::size_t k = 0; k < n; ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * dt;
    const Eigen::MatrixXcd h = hamiltonian_at(t_mid);
    if (k == 0) u = Eigen::MatrixXcd::Identity(h.rows(), h.cols());
    detail::check_step(h.cwiseAbs().maxCoeff(), dt, t_mid);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    Eigen::VectorXcd phases(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      phases(i) = std::polar(1.0, -kRadPerMHzNs * dt * es.eigenvalues()(i));
    }
    u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * u;
  }
  if (n == 0) {
    const Eigen::MatrixXcd h = hamiltonian_at(0.0);
    u = Eigen::MatrixXcd::Identity(h.rows(), h.cols());
  }
  Propagator out;
  out.matrix = std::move(u);
  out.frame = frame;
  out.t = t_f;
  return out;
}

// -------------------------------------------------------------------------
// Effective (SWA + RWA) engine
// -------------------------------------------------------------------------

namespace detail {
inline double lerp_at(const std::vector<double>& v, double dt, double t) {
  const double x = t / dt;
  if (x <= 0.0) return v.front();
  const auto k = static_cast<std::size_t>(x);
  if (k + 1 >= v.size()) return v.back();
  const double frac = x - static_cast<double>(k);
  return v[k] * (1.0 - frac) + v[k + 1] * frac;
}
}  // namespace detail

// Per-realization noise samples on their own uniform grid.
struct ChannelData {
  double dt = 0.0;                                // sampling step [ns]
  const std::vector<double>* detuning = nullptr;  // beta_{U-eps}(t) [MHz]
  const std::vector<double>* zeeman1 = nullptr;   // E_Z1 fluctuation [MHz]
  const std::vector<double>* zeeman2 = nullptr;   // E_Z2 fluctuation [MHz]

  double detuning_at(double t) const {
    return detuning ? detail::lerp_at(*detuning, dt, t) : 0.0;
  }
  double zeeman1_at(double t) const {
    return zeeman1 ? detail::lerp_at(*zeeman1, dt, t) : 0.0;
  }
  double zeeman2_at(double t) const {
    return zeeman2 ? detail::lerp_at(*zeeman2, dt, t) : 0.0;
  }
};

struct EffectiveRun {
  Matrix4cd u_rot = Matrix4cd::Identity();  // rotated-frame projected propagator
  double leakage = 0.0;
  double t_f = 0.0;
  std::vector<double> cache_t;
  std::vector<Matrix4cd> cache_u;    // rotating-frame propagator snapshots
  std::vector<double> cache_phi5;    // accumulated doublon phase [rad]
};

namespace detail {

// Noise can in principle push U-eps+beta toward the tunneling scale where the
// perturbative exchange diverges; keep the denominator bounded away from zero.
inline double clamp_denominator(double den, double u_minus_eps) {
  const double floor = 0.02 * u_minus_eps;
  return den < floor ? floor : den;
}

// Bare-frame 5x5 propagator from the rotating-frame 4x4 block, the
// accumulated doublon phase and the second-order SW maps.
inline Matrix5cd reconstruct_bare(const SystemParams& p, const Matrix4cd& u_rwa, double t,
                                  double doublon_phase, const Matrix5d& e_minus,
                                  const Matrix5d& e_plus) {
  Matrix5cd b = Matrix5cd::Zero();
  b.topLeftCorner<4, 4>() = rotating_frame_phases(p, t).asDiagonal() * u_rwa;
  b(kDoublon, kDoublon) = std::polar(1.0, -doublon_phase);
  return e_minus.cast<std::complex<double>>() * b * e_plus.cast<std::complex<double>>();
}

inline std::pair<Matrix4cd, double> project_and_rotate(const SystemParams& p,
                                                       const Matrix5cd& u_bare, double t) {
  auto [block, leakage] = project_4x4(u_bare);
  const Matrix4cd rotated = rotating_frame_phases(p, t).conjugate().asDiagonal() * block;
  return {rotated, leakage};
}

}  // namespace detail

struct EffectiveOptions {
  double dt = 0.0;              // 0 -> waveform grid step
  std::size_t cache_stride = 0; // cache v(t) every stride-th grid node (0 = off)
};

// Steps the rotating-frame 4x4 Hamiltonian with midpoint envelopes and noise;
// reconstructs the bare-frame propagator through e^{-S} ... e^{+S}.
inline EffectiveRun run_effective(const SystemParams& p, const SystematicError& se,
                                  const Waveform* wave, const ChannelData& noise,
                                  double t_f, const EffectiveOptions& opt = {}) {
  const double dt = opt.dt > 0.0 ? opt.dt : (wave ? wave->dt : t_f / 5000.0);
  const auto n = static_cast<std::size_t>(std::llround(t_f / dt));
  const double t0_eff = p.t0 + se.alpha_t0;
  const double den_p = p.u_minus_eps + 0.5 * p.delta_ez;
  const double den_m = p.u_minus_eps - 0.5 * p.delta_ez;
  const double jp0 = t0_eff * t0_eff / den_p;
  const double jm0 = t0_eff * t0_eff / den_m;
  const double drive_scale = 0.25 * p.g_factor_rate;
  const auto [e_minus, e_plus] = sw_frame_maps(p, se.alpha_t0);
  const double doublon_rate = kRadPerMHzNs * (p.u_minus_eps + jp0 + jm0);

  EffectiveRun run;
  run.t_f = t_f;
  Matrix4cd u = Matrix4cd::Identity();

  auto maybe_cache = [&](std::size_t k, const Matrix4cd& u_now) {
    if (opt.cache_stride == 0) return;
    if (k % opt.cache_stride != 0 && k != n) return;
    const double t = static_cast<double>(k) * dt;
    run.cache_t.push_back(t);
    run.cache_u.push_back(u_now);
    run.cache_phi5.push_back(doublon_rate * t);
  };

  maybe_cache(0, u);
  Matrix4cd h = Matrix4cd::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * dt;
    const double beta = noise.detuning_at(t_mid);
    const double z1 = noise.zeeman1_at(t_mid);
    const double z2 = noise.zeeman2_at(t_mid);
    const double jp =
        t0_eff * t0_eff / detail::clamp_denominator(den_p + beta, p.u_minus_eps);
    const double jm =
        t0_eff * t0_eff / detail::clamp_denominator(den_m + beta, p.u_minus_eps);
    const double jx = 0.5 * (jp + jm);
    std::complex<double> d(0.0, 0.0);
    if (wave) {
      d = std::complex<double>(drive_scale * detail::lerp_at(wave->omega_x, wave->dt, t_mid),
                               drive_scale * detail::lerp_at(wave->omega_y, wave->dt, t_mid));
    }
    h(kUpUp, kUpUp) = 0.5 * (z1 + z2);
    h(kUpDown, kUpDown) = 0.5 * p.delta_ez - jm + 0.5 * (z2 - z1);
    h(kDownUp, kDownUp) = -0.5 * p.delta_ez - jm + 0.5 * (z1 - z2);
    h(kDownDown, kDownDown) = -0.5 * (z1 + z2);
    h(kUpUp, kUpDown) = std::conj(d);
    h(kUpDown, kUpUp) = d;
    h(kUpUp, kDownUp) = std::conj(d);
    h(kDownUp, kUpUp) = d;
    h(kUpDown, kDownUp) = jx;
    h(kDownUp, kUpDown) = jx;
    h(kUpDown, kDownDown) = std::conj(d);
    h(kDownDown, kUpDown) = d;
    h(kDownUp, kDownDown) = std::conj(d);
    h(kDownDown, kDownUp) = d;
    const Matrix4cd m = std::complex<double>(0.0, -kRadPerMHzNs * dt) * h;
    u = (detail::expm_small_antiherm(m) * u).eval();
    maybe_cache(k + 1, u);
  }

  // Noise enters this engine only through the exchange couplings; the
  // decoupled doublon keeps its static phase.
  const Matrix5cd bare =
      detail::reconstruct_bare(p, u, t_f, doublon_rate * t_f, e_minus, e_plus);
  std::tie(run.u_rot, run.leakage) = detail::project_and_rotate(p, bare, t_f);
  return run;
}

// Bare-frame doublon response vector v(t) = U_I(t)^dag e5 reconstructed from
// a cached snapshot; used by oracle comparisons against the lab-frame engine.
inline Vector5cd bare_doublon_vector(const SystemParams& p, const SystematicError& se,
                                     const Matrix4cd& u_rwa, double t, double phi5) {
  const auto [e_minus, e_plus] = sw_frame_maps(p, se.alpha_t0);
  const Matrix5cd bare = detail::reconstruct_bare(p, u_rwa, t, phi5, e_minus, e_plus);
  return bare.row(kDoublon).conjugate().transpose();
}

// Zero-drive evolution recorded at the requested time marks (rotated frame).
// The 4x4 splits into stationary corners plus a 2x2 exchange block, stepped
// with closed-form exponentials.
inline std::vector<Matrix4cd> free_evolution_rotated(const SystemParams& p,
                                                     const SystematicError& se,
                                                     const ChannelData& noise,
                                                     const std::vector<double>& marks_ns,
                                                     double dt) {
  const double t_max = marks_ns.empty() ? 0.0 : marks_ns.back();
  const auto n = static_cast<std::size_t>(std::llround(t_max / dt));
  const double t0_eff = p.t0 + se.alpha_t0;
  const double den_p = p.u_minus_eps + 0.5 * p.delta_ez;
  const double den_m = p.u_minus_eps - 0.5 * p.delta_ez;
  const double jp0 = t0_eff * t0_eff / den_p;
  const double jm0 = t0_eff * t0_eff / den_m;
  const auto [e_minus, e_plus] = sw_frame_maps(p, se.alpha_t0);
  const double doublon_rate = kRadPerMHzNs * (p.u_minus_eps + jp0 + jm0);

  // middle-block propagator entries, corner phases, beta integral
  Eigen::Matrix2cd um = Eigen::Matrix2cd::Identity();
  double phi_uu = 0.0, phi_dd = 0.0;

  std::vector<Matrix4cd> out;
  out.reserve(marks_ns.size());
  std::size_t next_mark = 0;
  auto record = [&](std::size_t k) {
    const double t = static_cast<double>(k) * dt;
    while (next_mark < marks_ns.size() &&
           static_cast<std::size_t>(std::llround(marks_ns[next_mark] / dt)) <= k) {
      Matrix4cd u = Matrix4cd::Zero();
      u(kUpUp, kUpUp) = std::polar(1.0, phi_uu);
      u(kDownDown, kDownDown) = std::polar(1.0, phi_dd);
      u.block<2, 2>(kUpDown, kUpDown) = um;
      const double phi5 = doublon_rate * t;
      const Matrix5cd bare = detail::reconstruct_bare(p, u, t, phi5, e_minus, e_plus);
      out.push_back(detail::project_and_rotate(p, bare, t).first);
      ++next_mark;
    }
  };

  record(0);
  for (std::size_t k = 0; k < n && next_mark < marks_ns.size(); ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * dt;
    const double beta = noise.detuning_at(t_mid);
    const double z1 = noise.zeeman1_at(t_mid);
    const double z2 = noise.zeeman2_at(t_mid);
    const double jp =
        t0_eff * t0_eff / detail::clamp_denominator(den_p + beta, p.u_minus_eps);
    const double jm =
        t0_eff * t0_eff / detail::clamp_denominator(den_m + beta, p.u_minus_eps);
    // 2x2 block: -jm*I + wz*sigma_z + wx*sigma_x with wz = dEz/2 + (z2-z1)/2
    const double wz = 0.5 * p.delta_ez + 0.5 * (z2 - z1);
    const double wx = 0.5 * (jp + jm);
    const double wn = std::hypot(wz, wx);
    const double theta0 = kRadPerMHzNs * dt * (-jm);
    const double thetaw = kRadPerMHzNs * dt * wn;
    const std::complex<double> phase0 = std::polar(1.0, -theta0);
    const double c = std::cos(thetaw), s = std::sin(thetaw);
    const double nz = wn > 0.0 ? wz / wn : 0.0;
    const double nx = wn > 0.0 ? wx / wn : 0.0;
    Eigen::Matrix2cd step;
    step << phase0 * std::complex<double>(c, -s * nz),
        phase0 * std::complex<double>(0.0, -s * nx),
        phase0 * std::complex<double>(0.0, -s * nx),
        phase0 * std::complex<double>(c, s * nz);
    um = (step * um).eval();
    phi_uu += -kRadPerMHzNs * dt * 0.5 * (z1 + z2);
    phi_dd += kRadPerMHzNs * dt * 0.5 * (z1 + z2);
    record(k + 1);
  }
  return out;
}

// Noiseless zero-drive propagator at t_f (rotated frame); the self-target for
// baseline gate evaluations.
inline Matrix4cd noiseless_free_unitary(const SystemParams& p, const SystematicError& se,
                                        double t_f, double dt = 0.5) {
  return free_evolution_rotated(p, se, {}, {t_f}, dt).front();
}

// Closed-form zero-drive propagator via 2x2 diagonalization (oracle path).
inline Matrix4cd closed_form_free_unitary(const SystemParams& p, const SystematicError& se,
                                          double t_f) {
  const double t0_eff = p.t0 + se.alpha_t0;
  const auto [jp, jm] = exchange_couplings(t0_eff, p.u_minus_eps, p.delta_ez);
  Eigen::Matrix2d h;
  h << 0.5 * p.delta_ez - jm, 0.5 * (jp + jm), 0.5 * (jp + jm), -0.5 * p.delta_ez - jm;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
  Eigen::Matrix2cd um = Eigen::Matrix2cd::Zero();
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d v = es.eigenvectors().col(i);
    um += std::polar(1.0, -kRadPerMHzNs * es.eigenvalues()(i) * t_f) *
          (v * v.transpose()).cast<std::complex<double>>();
  }
  Matrix4cd u = Matrix4cd::Identity();
  u.block<2, 2>(kUpDown, kUpDown) = um;
  const auto [e_minus, e_plus] = sw_frame_maps(p, se.alpha_t0);
  const double phi5 =
      kRadPerMHzNs * (p.u_minus_eps + jp + jm) * t_f;
  const Matrix5cd bare = detail::reconstruct_bare(p, u, t_f, phi5, e_minus, e_plus);
  return detail::project_and_rotate(p, bare, t_f).first;
}

// -------------------------------------------------------------------------
// Full lab-frame engine
// -------------------------------------------------------------------------

struct FullRun {
  Matrix5cd u_lab = Matrix5cd::Identity();
  double t_f = 0.0;
  std::vector<double> cache_t;
  std::vector<Vector5cd> cache_v;
};

// Time-ordered product under the full 5x5 Hamiltonian with the microwave
// carrier resolved. The Hamiltonian is real symmetric, so each step uses the
// cos/sin series on the real matrix. Envelopes and noise are interpolated
// linearly at the step midpoints.
inline FullRun run_full(const SystemParams& p, const SystematicError& se,
                        const Waveform* wave, const ChannelData& noise,
                        double t_f, double dt_request = 2e-5,
                        std::size_t cache_every_coarse = 0) {
  const double dt_coarse = wave ? wave->dt : t_f / 5000.0;
  const auto n_coarse = static_cast<std::size_t>(std::llround(t_f / dt_coarse));
  const auto per = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(dt_coarse / dt_request)));
  const double dt = dt_coarse / static_cast<double>(per);

  const double t0_eff = p.t0 + se.alpha_t0;
  double beta_max = 0.0;
  if (noise.detuning) {
    for (double b : *noise.detuning) beta_max = std::max(beta_max, std::abs(b));
  }
  detail::check_step(p.u_minus_eps + beta_max, dt, 0.0);

  Matrix5d h = Matrix5d::Zero();
  h(kUpUp, kUpUp) = p.ebar_z;
  h(kUpDown, kUpDown) = 0.5 * p.delta_ez;
  h(kDownUp, kDownUp) = -0.5 * p.delta_ez;
  h(kDownDown, kDownDown) = -p.ebar_z;
  h(kUpDown, kDoublon) = t0_eff;
  h(kDoublon, kUpDown) = t0_eff;
  h(kDownUp, kDoublon) = -t0_eff;
  h(kDoublon, kDownUp) = -t0_eff;

  Matrix5d u_re = Matrix5d::Identity();
  Matrix5d u_im = Matrix5d::Zero();
  Matrix5d cosb, sinb;

  FullRun run;
  run.t_f = t_f;
  auto maybe_cache = [&](std::size_t coarse_idx) {
    if (cache_every_coarse == 0) return;
    if (coarse_idx % cache_every_coarse != 0 && coarse_idx != n_coarse) return;
    run.cache_t.push_back(static_cast<double>(coarse_idx) * dt_coarse);
    Matrix5cd u = u_re.cast<std::complex<double>>() +
                  std::complex<double>(0.0, 1.0) * u_im.cast<std::complex<double>>();
    run.cache_v.push_back(u.row(kDoublon).conjugate().transpose());
  };

  const double carrier_rate = kRadPerMHzNs * p.ebar_z;
  maybe_cache(0);
  for (std::size_t kc = 0; kc < n_coarse; ++kc) {
    const double ox0 = wave ? wave->omega_x[kc] : 0.0;
    const double ox1 = wave ? wave->omega_x[kc + 1] : 0.0;
    const double oy0 = wave ? wave->omega_y[kc] : 0.0;
    const double oy1 = wave ? wave->omega_y[kc + 1] : 0.0;
    const double t_base = static_cast<double>(kc) * dt_coarse;
    const double b0 = noise.detuning_at(t_base);
    const double b1 = noise.detuning_at(t_base + dt_coarse);
    for (std::size_t ks = 0; ks < per; ++ks) {
      const double frac = (static_cast<double>(ks) + 0.5) / static_cast<double>(per);
      const double t_mid = t_base + frac * dt_coarse;
      const double ox = ox0 + (ox1 - ox0) * frac;
      const double oy = oy0 + (oy1 - oy0) * frac;
      const double phi = carrier_rate * t_mid;
      const double ex = p.g_factor_rate * (ox * std::cos(phi) - oy * std::sin(phi));
      const double half = 0.5 * ex;
      h(kUpUp, kUpDown) = half;
      h(kUpDown, kUpUp) = half;
      h(kUpUp, kDownUp) = half;
      h(kDownUp, kUpUp) = half;
      h(kUpDown, kDownDown) = half;
      h(kDownDown, kUpDown) = half;
      h(kDownUp, kDownDown) = half;
      h(kDownDown, kDownUp) = half;
      h(kDoublon, kDoublon) = p.u_minus_eps + b0 + (b1 - b0) * frac;
      const Matrix5d b = (kRadPerMHzNs * dt) * h;
      detail::cos_sin_small_sym5(b, cosb, sinb);
      // U <- (cos - i sin) U
      const Matrix5d re = cosb * u_re + sinb * u_im;
      const Matrix5d im = cosb * u_im - sinb * u_re;
      u_re = re;
      u_im = im;
    }
    maybe_cache(kc + 1);
  }
  run.u_lab = u_re.cast<std::complex<double>>() +
              std::complex<double>(0.0, 1.0) * u_im.cast<std::complex<double>>();
  return run;
}

// -------------------------------------------------------------------------
// Ensemble averaging
// -------------------------------------------------------------------------

enum class Engine { full, effective };

struct EnsembleOptions {
  Engine engine = Engine::effective;
  double dt = 0.0;        // effective step; 0 -> waveform grid
  double dt_full = 2e-5;  // lab-frame step
  int processes_per_decade = 2;
  int workers = 1;
  bool keep_per_realization = false;
};

namespace detail {

inline EnsembleResult reduce_ensemble(std::vector<double>&& values, bool keep) {
  EnsembleResult r;
  r.n_realizations = values.size();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
  r.mean_infidelity = mean;
  r.std_error = std::sqrt(var / static_cast<double>(values.size()));
  if (keep) r.per_realization = std::move(values);
  return r;
}

}  // namespace detail

// Ensemble-averaged Eq.-3 infidelity over detuning-noise realizations.
// Realization i uses the generator derived from (master_seed, i); results are
// independent of execution order.
inline EnsembleResult ensemble_infidelity(const SystemParams& p, const SystematicError& se,
                                          const NoiseSpec& spec, const Waveform& pulses,
                                          const Matrix4cd& target, std::size_t n,
                                          std::uint64_t master_seed,
                                          const EnsembleOptions& opt = {}) {
  if (n < 1) throw ConfigError("ensemble_infidelity: need n >= 1");
  const double t_f = pulses.duration();
  const double dt = opt.dt > 0.0 ? opt.dt : pulses.dt;
  const bool zero_drive = max_field(pulses).combined == 0.0;
  if (opt.engine == Engine::full && !zero_drive && !pulses.filtered) {
    throw ConfigError("ensemble_infidelity: full-engine runs model the device and need filtered pulses");
  }

  const auto n_nodes = static_cast<std::size_t>(std::llround(t_f / dt)) + 1;
  const bool noiseless = spec.sigma == 0.0;
  const OUBank bank = noiseless ? OUBank{} : build_bank(spec, opt.processes_per_decade);

  auto evaluate = [&](const std::vector<double>* beta) {
    ChannelData ch;
    ch.dt = dt;
    ch.detuning = beta;
    if (opt.engine == Engine::full) {
      const FullRun fr = run_full(p, se, zero_drive ? nullptr : &pulses, ch, t_f,
                                  opt.dt_full);
      auto [block, leak] = project_4x4(fr.u_lab);
      const Matrix4cd u_rot =
          rotating_frame_phases(p, t_f).conjugate().asDiagonal() * block;
      return infidelity(u_rot, target);
    }
    if (zero_drive) {
      return infidelity(free_evolution_rotated(p, se, ch, {t_f}, dt).front(), target);
    }
    EffectiveOptions eopt;
    eopt.dt = dt;
    return infidelity(run_effective(p, se, &pulses, ch, t_f, eopt).u_rot, target);
  };

  if (noiseless) {
    std::vector<double> values(n, evaluate(nullptr));
    return detail::reduce_ensemble(std::move(values), opt.keep_per_realization);
  }

  std::vector<double> values(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t i) {
        const NoiseTrajectory traj =
            sample_trajectory(bank, dt, n_nodes, derive_seed(master_seed, i));
        values[i] = evaluate(&traj.samples);
      },
      opt.workers);
  return detail::reduce_ensemble(std::move(values), opt.keep_per_realization);
}

}  // namespace spinforge
