#pragma once

// Two-qubit target gates and ideal single-qubit rotations in the
// computational basis |up,up>, |up,down>, |down,up>, |down,down>
// (|dot2,dot1> labeling).

#include <cmath>
#include <complex>

#include "spinforge/model.hpp"

namespace spinforge {

// CNOT with control = dot2 (active on |up>), target = dot1.
inline Matrix4cd cnot_target() {
  Matrix4cd g = Matrix4cd::Zero();
  g(kUpUp, kUpDown) = 1.0;
  g(kUpDown, kUpUp) = 1.0;
  g(kDownUp, kDownUp) = 1.0;
  g(kDownDown, kDownDown) = 1.0;
  return g;
}

// I2 (x) X1: flips dot1 in both dot2 sectors.
inline Matrix4cd x1_target() {
  Matrix4cd g = Matrix4cd::Zero();
  g(kUpUp, kUpDown) = 1.0;
  g(kUpDown, kUpUp) = 1.0;
  g(kDownUp, kDownDown) = 1.0;
  g(kDownDown, kDownUp) = 1.0;
  return g;
}

// H2 (x) I1: Hadamard on dot2.
inline Matrix4cd h2_target() {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix4cd g = Matrix4cd::Zero();
  g(kUpUp, kUpUp) = s;
  g(kUpUp, kDownUp) = s;
  g(kUpDown, kUpDown) = s;
  g(kUpDown, kDownDown) = s;
  g(kDownUp, kUpUp) = s;
  g(kDownUp, kDownUp) = -s;
  g(kDownDown, kUpDown) = s;
  g(kDownDown, kDownDown) = -s;
  return g;
}

inline Matrix4cd cz_target() {
  Matrix4cd g = Matrix4cd::Identity();
  g(kDownDown, kDownDown) = -1.0;
  return g;
}

// Rotation of dot2 by angle theta about an equatorial axis at azimuth phi
// (phi = 0 is X, pi/2 is Y), acting as identity on dot1.
inline Matrix4cd dot2_rotation(double theta, double phi) {
  const std::complex<double> c(std::cos(0.5 * theta), 0.0);
  const std::complex<double> s =
      std::complex<double>(0.0, -1.0) * std::sin(0.5 * theta) * std::polar(1.0, -phi);
  Matrix4cd g = Matrix4cd::Zero();
  // dot2 |up> rows: kUpUp,kUpDown; |down> rows: kDownUp,kDownDown
  g(kUpUp, kUpUp) = c;
  g(kUpDown, kUpDown) = c;
  g(kDownUp, kDownUp) = c;
  g(kDownDown, kDownDown) = c;
  g(kUpUp, kDownUp) = s;
  g(kUpDown, kDownDown) = s;
  g(kDownUp, kUpUp) = -std::conj(s);
  g(kDownDown, kUpDown) = -std::conj(s);
  return g;
}

inline Matrix4cd dot2_rx(double theta) { return dot2_rotation(theta, 0.0); }
inline Matrix4cd dot2_ry(double theta) { return dot2_rotation(theta, 0.5 * kPi); }

inline Matrix4cd dot2_rz(double theta) {
  Matrix4cd g = Matrix4cd::Identity();
  const auto up = std::polar(1.0, -0.5 * theta);
  const auto dn = std::polar(1.0, 0.5 * theta);
  g(kUpUp, kUpUp) = up;
  g(kUpDown, kUpDown) = up;
  g(kDownUp, kDownUp) = dn;
  g(kDownDown, kDownDown) = dn;
  return g;
}

// diag of single-qubit Z phases: phi1 on dot1 |up>, phi2 on dot2 |up>.
inline Matrix4cd local_z_phases(double phi1, double phi2) {
  Matrix4cd g = Matrix4cd::Zero();
  g(kUpUp, kUpUp) = std::polar(1.0, phi1 + phi2);
  g(kUpDown, kUpDown) = std::polar(1.0, phi2);
  g(kDownUp, kDownUp) = std::polar(1.0, phi1);
  g(kDownDown, kDownDown) = 1.0;
  return g;
}

}  // namespace spinforge
