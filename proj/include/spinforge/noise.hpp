#pragma once

// 1/f^alpha noise as a superposition of Ornstein-Uhlenbeck processes, the
// matching analytic spectrum, and the correlation function obtained from it
// via the Wiener-Khinchin theorem.
//
// Spectral convention: S(omega) is the two-sided density in angular
// frequency, MHz^2 per (rad/s), so sigma^2 = (1/2pi) Int_{-inf}^{inf} S domega
// = (1/pi) Int_0^inf S domega. Frequencies in the public API are ordinary
// frequencies in Hz (omega = 2*pi*f).

#include <cmath>
#include <cstdint>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/rng.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

struct NoiseSpec {
  double alpha = 1.01;      // spectral exponent
  double sigma = 2400.0;    // stationary standard deviation [MHz]
  double f_low = 1e-2;      // saturation corner [Hz]
  double f_high = 1e6;      // band top [Hz]
  double white_floor = 0.0; // constant c added on [f_low, f_high] [MHz^2/(rad/s)]

  void validate() const {
    if (!(alpha >= 0.5 && alpha <= 3.0)) {
      throw ConfigError("NoiseSpec: alpha must lie in [0.5, 3]");
    }
    if (!(f_low > 0.0 && f_low < f_high)) {
      throw ConfigError("NoiseSpec: need 0 < f_low < f_high");
    }
    if (!(sigma >= 0.0)) throw ConfigError("NoiseSpec: sigma must be non-negative");
    if (!(white_floor >= 0.0)) throw ConfigError("NoiseSpec: white_floor must be non-negative");
  }

  double white_variance() const { return white_floor * kTwoPi * f_high / kPi; }
};

struct OUBank {
  std::vector<double> rates;       // relaxation rates [1/ns], strictly increasing
  std::vector<double> amplitudes;  // per-process stationary std dev [MHz]
  std::vector<double> states;      // current values [MHz]
};

struct NoiseTrajectory {
  double dt = 0.0;              // ns
  std::vector<double> samples;  // beta values [MHz]
  std::uint64_t seed = 0;
};

namespace detail {
inline double band_integral(double alpha, double w_low, double w_high) {
  if (std::abs(alpha - 1.0) < 1e-12) return std::log(w_high / w_low);
  return (std::pow(w_high, 1.0 - alpha) - std::pow(w_low, 1.0 - alpha)) / (1.0 - alpha);
}

// Power-law prefactor A solving the sigma^2 normalization.
inline double spectrum_prefactor(const NoiseSpec& spec) {
  const double w_low = kTwoPi * spec.f_low;
  const double w_high = kTwoPi * spec.f_high;
  const double numer = kPi * spec.sigma * spec.sigma - spec.white_floor * w_high;
  if (numer < 0.0) {
    throw ConfigError("NoiseSpec: white_floor alone exceeds the requested variance");
  }
  const double denom = std::pow(w_low, 1.0 - spec.alpha) +
                       band_integral(spec.alpha, w_low, w_high);
  return numer / denom;
}
}  // namespace detail

// Piecewise analytic model: constant below f_low, A/omega^alpha + c on
// [f_low, f_high], zero above f_high.
inline double analytic_spectrum(const NoiseSpec& spec, double f_hz) {
  spec.validate();
  if (!(f_hz > 0.0)) throw ConfigError("analytic_spectrum: f must be positive");
  if (f_hz > spec.f_high) return 0.0;
  const double a = detail::spectrum_prefactor(spec);
  const double w = kTwoPi * std::max(f_hz, spec.f_low);
  return a * std::pow(w, -spec.alpha) + spec.white_floor;
}

// Lorentzian sum approximating A/f^alpha across [f_low, f_high]. Per-process
// weights go as rate^{(1-alpha)/2}, rescaled so the stationary variance of
// the sum equals sigma^2. A band-limited white process carries white_floor.
inline OUBank build_bank(const NoiseSpec& spec, int processes_per_decade = 2) {
  spec.validate();
  if (processes_per_decade < 1) {
    throw ConfigError("build_bank: processes_per_decade must be >= 1");
  }
  OUBank bank;
  const double decades = std::log10(spec.f_high / spec.f_low);
  const int n = static_cast<int>(std::floor(decades * processes_per_decade + 1e-9)) + 1;
  const double white_var = spec.white_variance();
  double power_var = spec.sigma * spec.sigma - white_var;
  if (power_var < 0.0) {
    throw ConfigError("build_bank: white_floor alone exceeds the requested variance");
  }
  std::vector<double> weights(n);
  double weight_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const double f_j = spec.f_low * std::pow(10.0, static_cast<double>(j) / processes_per_decade);
    bank.rates.push_back(kTwoPi * f_j * 1e-9);  // Hz -> 1/ns
    weights[j] = std::pow(f_j, 1.0 - spec.alpha);
    weight_sum += weights[j];
  }
  for (int j = 0; j < n; ++j) {
    const double var_j = weight_sum > 0.0 ? power_var * weights[j] / weight_sum : 0.0;
    bank.amplitudes.push_back(std::sqrt(var_j));
  }
  if (white_var > 0.0) {
    bank.rates.push_back(kTwoPi * spec.f_high * std::pow(10.0, 0.25) * 1e-9);
    bank.amplitudes.push_back(std::sqrt(white_var));
  }
  bank.states.assign(bank.rates.size(), 0.0);
  return bank;
}

// Closed-form spectrum of the bank (sum of Lorentzians), MHz^2/(rad/s).
inline double bank_spectrum(const OUBank& bank, double f_hz) {
  const double w = kTwoPi * f_hz;  // rad/s
  double s = 0.0;
  for (std::size_t j = 0; j < bank.rates.size(); ++j) {
    const double r = bank.rates[j] * 1e9;  // 1/ns -> 1/s
    s += 2.0 * bank.amplitudes[j] * bank.amplitudes[j] * r / (r * r + w * w);
  }
  return s;
}

// Closed-form autocorrelation of the bank [MHz^2].
inline double bank_correlation(const OUBank& bank, double tau_ns) {
  double c = 0.0;
  for (std::size_t j = 0; j < bank.rates.size(); ++j) {
    c += bank.amplitudes[j] * bank.amplitudes[j] *
         std::exp(-bank.rates[j] * std::abs(tau_ns));
  }
  return c;
}

// Exact OU update per step, every process initialized from its stationary
// distribution. Deterministic in (bank, dt, n, seed).
inline NoiseTrajectory sample_trajectory(const OUBank& bank, double dt_ns, std::size_t n,
                                         std::uint64_t seed) {
  if (!(dt_ns > 0.0)) throw ConfigError("sample_trajectory: dt must be positive");
  if (n < 1) throw ConfigError("sample_trajectory: n must be >= 1");
  Rng rng(seed);
  const std::size_t m = bank.rates.size();
  std::vector<double> x(m), decay(m), kick(m);
  for (std::size_t j = 0; j < m; ++j) {
    x[j] = bank.amplitudes[j] * rng.normal();
    const double e = std::exp(-bank.rates[j] * dt_ns);
    decay[j] = e;
    kick[j] = bank.amplitudes[j] * std::sqrt(std::max(0.0, 1.0 - e * e));
  }
  NoiseTrajectory traj;
  traj.dt = dt_ns;
  traj.seed = seed;
  traj.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        x[j] = x[j] * decay[j] + kick[j] * rng.normal();
        sum += x[j];
      }
      traj.samples[i] = sum;
    } else {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum += x[j];
      traj.samples[i] = sum;
    }
  }
  return traj;
}

// C(tau) = (1/pi) Int_0^inf S(omega) cos(omega tau) domega, evaluated from
// the analytic spectrum: the constant and white pieces integrate in closed
// form, the power-law band on a log-frequency grid.
inline double correlation(const NoiseSpec& spec, double tau_ns,
                          int points_per_decade = 200) {
  spec.validate();
  const double a = detail::spectrum_prefactor(spec);
  const double w_low = kTwoPi * spec.f_low;   // rad/s
  const double w_high = kTwoPi * spec.f_high;
  const double tau_s = std::abs(tau_ns) * 1e-9;
  const double s_low = a * std::pow(w_low, -spec.alpha) + spec.white_floor;

  // constant piece [0, w_low] and white piece [w_low, w_high]
  double c;
  if (tau_s == 0.0) {
    c = s_low * w_low + spec.white_floor * (w_high - w_low);
  } else {
    c = s_low * std::sin(w_low * tau_s) / tau_s +
        spec.white_floor * (std::sin(w_high * tau_s) - std::sin(w_low * tau_s)) / tau_s;
  }

  // power-law band, log-trapezoid
  const double decades = std::log10(spec.f_high / spec.f_low);
  const int n = std::max(2, static_cast<int>(std::ceil(decades * points_per_decade)) + 1);
  const double step = decades / (n - 1);
  double prev_w = w_low;
  double prev_f = a * std::pow(w_low, -spec.alpha) * std::cos(w_low * tau_s);
  for (int j = 1; j < n; ++j) {
    const double w = w_low * std::pow(10.0, j * step);
    const double f = a * std::pow(w, -spec.alpha) * std::cos(w * tau_s);
    c += 0.5 * (prev_f + f) * (w - prev_w);
    prev_w = w;
    prev_f = f;
  }
  return c / kPi;
}

// Uniform-lag correlation table for quadrature use.
struct CorrelationTable {
  double dtau = 0.0;           // ns
  std::vector<double> values;  // C(k * dtau) [MHz^2]

  double at(double tau_ns) const {
    const double x = std::abs(tau_ns) / dtau;
    const std::size_t k = static_cast<std::size_t>(x);
    if (k + 1 >= values.size()) return values.back();
    const double frac = x - static_cast<double>(k);
    return values[k] * (1.0 - frac) + values[k + 1] * frac;
  }
};

inline CorrelationTable build_correlation_table(const NoiseSpec& spec, double tau_max_ns,
                                                std::size_t n_points = 1024) {
  CorrelationTable table;
  table.dtau = tau_max_ns / static_cast<double>(n_points - 1);
  table.values.resize(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    table.values[k] = correlation(spec, static_cast<double>(k) * table.dtau);
  }
  return table;
}

}  // namespace spinforge
