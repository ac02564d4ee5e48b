#pragma once

// Double-quantum-dot two-qubit model: system parameters and the four
// Hamiltonian representations (full ideal, full realistic, second-order
// Schrieffer-Wolff 4x4, and the rotating-frame 4x4 used for fast dynamics).
//
// Basis order everywhere: |up,up>, |up,down>, |down,up>, |down,down>, |0,2>
// in the |dot2,dot1> labeling. Entries are H/h in MHz.

#include <cmath>
#include <complex>
#include <utility>

#include <Eigen/Dense>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

using Matrix4cd = Eigen::Matrix4cd;
using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix5cd = Eigen::Matrix<std::complex<double>, 5, 5>;
using Vector4cd = Eigen::Vector4cd;
using Vector5cd = Eigen::Matrix<std::complex<double>, 5, 1>;

// Basis indices.
enum BasisState : int { kUpUp = 0, kUpDown = 1, kDownUp = 2, kDownDown = 3, kDoublon = 4 };

struct SystemParams {
  double ebar_z = 39160.0;        // mean Zeeman splitting [MHz]
  double delta_ez = -40.0;        // E_Z2 - E_Z1 [MHz]
  double t0 = 900.0;              // interdot tunnel coupling [MHz]
  double u_minus_eps = 276710.0;  // detuned Coulomb energy U - eps [MHz]
  double eta = 0.0;               // x-direction g-factor difference fraction
  double g_factor_rate = 27.97;   // g*mu_B/h [MHz/mT]

  bool sw_valid() const { return u_minus_eps >= 50.0 * t0; }

  void validate() const {
    if (!(ebar_z > 0.0)) throw ConfigError("SystemParams: ebar_z must be positive");
    if (!(t0 >= 0.0)) throw ConfigError("SystemParams: t0 must be non-negative");
    if (!(u_minus_eps > 0.0)) throw ConfigError("SystemParams: u_minus_eps must be positive");
    if (!(std::abs(eta) <= 0.1)) throw ConfigError("SystemParams: |eta| must be <= 0.1");
    if (!(g_factor_rate > 0.0)) throw ConfigError("SystemParams: g_factor_rate must be positive");
  }
};

// Fixed tunnel-coupling uncertainty; constant over one simulation run.
struct SystematicError {
  double alpha_t0 = 0.0;  // [MHz]
};

struct HamiltonianSample {
  Matrix5cd matrix;  // Hermitian, MHz
  double time = 0.0; // ns
};

// Exchange couplings and SW generator derived from the system parameters.
struct EffectiveModel {
  double j_p = 0.0;          // t0^2 / (U - eps + dEz/2) [MHz]
  double j_m = 0.0;          // t0^2 / (U - eps - dEz/2) [MHz]
  double gamma_plus = 0.0;   // t0 / (U - eps + dEz/2)
  double gamma_minus = 0.0;  // t0 / (U - eps - dEz/2)
  Matrix5d sw_generator = Matrix5d::Zero();  // S, real antisymmetric
};

inline std::pair<double, double> exchange_couplings(double t0, double u_minus_eps,
                                                    double delta_ez) {
  const double dp = u_minus_eps + 0.5 * delta_ez;
  const double dm = u_minus_eps - 0.5 * delta_ez;
  return {t0 * t0 / dp, t0 * t0 / dm};
}

inline EffectiveModel make_effective_model(const SystemParams& p, double alpha_t0 = 0.0) {
  if (!p.sw_valid()) {
    throw ConfigError("make_effective_model: u_minus_eps < 50*t0, SW expansion invalid");
  }
  EffectiveModel m;
  const double t0 = p.t0 + alpha_t0;
  const auto [jp, jm] = exchange_couplings(t0, p.u_minus_eps, p.delta_ez);
  m.j_p = jp;
  m.j_m = jm;
  m.gamma_plus = t0 / (p.u_minus_eps + 0.5 * p.delta_ez);
  m.gamma_minus = t0 / (p.u_minus_eps - 0.5 * p.delta_ez);
  Matrix5d s = Matrix5d::Zero();
  s(kUpDown, kDoublon) = -m.gamma_minus;
  s(kDownUp, kDoublon) = m.gamma_plus;
  s(kDoublon, kUpDown) = m.gamma_minus;
  s(kDoublon, kDownUp) = -m.gamma_plus;
  m.sw_generator = s;
  return m;
}

// Full 5x5 ideal Hamiltonian with drive field ex = E_X(t) [MHz].
inline HamiltonianSample ideal_hamiltonian(const SystemParams& p, double ex, double t_ns) {
  const double half = 0.5 * ex;
  const double half_eta = 0.5 * (1.0 + p.eta) * ex;
  Matrix5cd h = Matrix5cd::Zero();
  h(kUpUp, kUpUp) = p.ebar_z;
  h(kUpDown, kUpDown) = 0.5 * p.delta_ez;
  h(kDownUp, kDownUp) = -0.5 * p.delta_ez;
  h(kDownDown, kDownDown) = -p.ebar_z;
  h(kDoublon, kDoublon) = p.u_minus_eps;
  h(kUpUp, kUpDown) = half;
  h(kUpUp, kDownUp) = half_eta;
  h(kUpDown, kDownDown) = half_eta;
  h(kDownUp, kDownDown) = half;
  h(kUpDown, kDoublon) = p.t0;
  h(kDownUp, kDoublon) = -p.t0;
  h = (h + h.adjoint()).eval();
  h.diagonal() *= 0.5;
  return {h, t_ns};
}

// Full 5x5 realistic Hamiltonian: filtered drive, tunnel uncertainty and
// detuning noise beta(t); eta is fixed to zero here.
inline HamiltonianSample realistic_hamiltonian(const SystemParams& p, const SystematicError& se,
                                               double beta, double ex_filt, double t_ns) {
  SystemParams q = p;
  q.eta = 0.0;
  q.t0 = p.t0 + se.alpha_t0;
  q.u_minus_eps = p.u_minus_eps + beta;
  return {ideal_hamiltonian(q, ex_filt, t_ns).matrix, t_ns};
}

struct SwaHamiltonian {
  Matrix4cd block;     // computational-subspace block [MHz]
  double doublon = 0;  // decoupled (5,5) scalar: U - eps + J_p + J_m [MHz]
};

// Second-order SW-approximated Hamiltonian in the lab frame.
inline SwaHamiltonian sw_effective_hamiltonian_4x4(const SystemParams& p, double ex) {
  const EffectiveModel m = make_effective_model(p);
  const double half = 0.5 * ex;
  const double jx = 0.5 * (m.j_p + m.j_m);
  Matrix4cd h = Matrix4cd::Zero();
  h(kUpUp, kUpUp) = p.ebar_z;
  h(kUpDown, kUpDown) = 0.5 * p.delta_ez - m.j_m;
  h(kDownUp, kDownUp) = -0.5 * p.delta_ez - m.j_m;
  h(kDownDown, kDownDown) = -p.ebar_z;
  h(kUpUp, kUpDown) = half;
  h(kUpUp, kDownUp) = half;
  h(kUpDown, kDownUp) = jx;
  h(kUpDown, kDownDown) = half;
  h(kDownUp, kDownDown) = half;
  h = (h + h.adjoint()).eval();
  h.diagonal() *= 0.5;
  return {h, p.u_minus_eps + m.j_p + m.j_m};
}

// Rotating-frame Hamiltonian after SWA + RWA. Drive envelopes are
// omega_x, omega_y = g*mu_B/h * Omega_{X,Y} in MHz.
inline Matrix4cd rwa_hamiltonian_4x4(const SystemParams& p, double omega_x, double omega_y) {
  if (std::abs(omega_x) >= p.ebar_z / 100.0 || std::abs(omega_y) >= p.ebar_z / 100.0) {
    throw ConstraintViolation("rwa_hamiltonian_4x4: drive envelope too strong for the RWA");
  }
  const EffectiveModel m = make_effective_model(p);
  const std::complex<double> d(0.25 * omega_x, 0.25 * omega_y);
  const double jx = 0.5 * (m.j_p + m.j_m);
  Matrix4cd h = Matrix4cd::Zero();
  h(kUpDown, kUpDown) = 0.5 * p.delta_ez - m.j_m;
  h(kDownUp, kDownUp) = -0.5 * p.delta_ez - m.j_m;
  h(kUpUp, kUpDown) = std::conj(d);
  h(kUpUp, kDownUp) = std::conj(d);
  h(kUpDown, kDownUp) = jx;
  h(kUpDown, kDownDown) = std::conj(d);
  h(kDownUp, kDownDown) = std::conj(d);
  h(kUpDown, kUpUp) = d;
  h(kDownUp, kUpUp) = d;
  h(kDownUp, kUpDown) = jx;
  h(kDownDown, kUpDown) = d;
  h(kDownDown, kDownUp) = d;
  return h;
}

// e^{-S} and e^{+S} truncated at second order in S.
inline std::pair<Matrix5d, Matrix5d> sw_frame_maps(const SystemParams& p,
                                                   double alpha_t0 = 0.0) {
  const EffectiveModel m = make_effective_model(p, alpha_t0);
  const Matrix5d& s = m.sw_generator;
  const Matrix5d s2_half = 0.5 * (s * s);
  return {Matrix5d::Identity() - s + s2_half, Matrix5d::Identity() + s + s2_half};
}

// Diagonal phases of the rotating-frame map U_0(t).
inline Vector4cd rotating_frame_phases(const SystemParams& p, double t_ns) {
  const double phi = phase_rad(p.ebar_z, t_ns);
  Vector4cd d;
  d << std::polar(1.0, -phi), 1.0, 1.0, std::polar(1.0, phi);
  return d;
}

inline Matrix4cd rotating_frame_map(const SystemParams& p, double t_ns) {
  return rotating_frame_phases(p, t_ns).asDiagonal();
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& h, double rel_tol = 1e-12) {
  const double scale = h.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (h - h.adjoint()).cwiseAbs().maxCoeff() < rel_tol * scale;
}

}  // namespace spinforge
