#pragma once

#include <numbers>

namespace spinforge {

// Unit convention used throughout: Hamiltonians are stored as H/h in MHz,
// times in ns, pulse amplitudes in mT. One MHz*ns is 1e-3 cycles, so every
// accumulated phase carries the conversion below.
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kCyclesPerMHzNs = 1e-3;
inline constexpr double kRadPerMHzNs = kTwoPi * kCyclesPerMHzNs;

// Phase in radians accumulated by a level at f [MHz] over t [ns].
inline double phase_rad(double f_mhz, double t_ns) {
  return kRadPerMHzNs * f_mhz * t_ns;
}

}  // namespace spinforge
