#pragma once

// Control pulses in the sin^3 basis, sampling to waveforms, and the Gaussian
// waveform-generator filter.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/fft.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

// Omega_X(t) = sum_k a_k sin^3((2k-1) pi t / t_f),
// Omega_Y(t) = sum_k b_k sin^3((2k) pi t / t_f).
// The sin^3 form makes both the pulse and its slope vanish at t=0 and t=t_f.
struct PulseParameterization {
  std::vector<double> a;  // mT
  std::vector<double> b;  // mT
  double t_f = 500.0;     // ns
  int k_max = 0;

  void validate() const {
    if (k_max < 1 || a.size() != static_cast<std::size_t>(k_max) ||
        b.size() != static_cast<std::size_t>(k_max)) {
      throw ConfigError("PulseParameterization: coefficient lists must have k_max entries");
    }
    if (!(t_f > 0.0)) throw ConfigError("PulseParameterization: t_f must be positive");
  }

  double omega_x_at(double t) const {
    double s = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const double u = std::sin((2 * k - 1) * kPi * t / t_f);
      s += a[k - 1] * u * u * u;
    }
    return s;
  }

  double omega_y_at(double t) const {
    double s = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const double u = std::sin(2 * k * kPi * t / t_f);
      s += b[k - 1] * u * u * u;
    }
    return s;
  }
};

inline PulseParameterization make_pulse(int k_max, double t_f) {
  PulseParameterization p;
  p.k_max = k_max;
  p.t_f = t_f;
  p.a.assign(k_max, 0.0);
  p.b.assign(k_max, 0.0);
  return p;
}

struct Waveform {
  double dt = 0.0;              // ns
  std::vector<double> omega_x;  // mT, samples on [0, t_f]
  std::vector<double> omega_y;  // mT
  bool filtered = false;

  std::size_t size() const { return omega_x.size(); }
  double duration() const { return dt * static_cast<double>(omega_x.size() - 1); }
};

// F(omega) = exp(-omega^2/omega_c^2); stored through f_c = omega_c/2pi.
struct FilterModel {
  double f_c_mhz = 425.4;

  double omega_c_rad_per_ns() const { return kTwoPi * f_c_mhz * kCyclesPerMHzNs; }

  void validate() const {
    if (!(f_c_mhz > 0.0)) throw ConfigError("FilterModel: cutoff must be positive");
  }
};

// Pointwise evaluation of both sums on the uniform grid covering [0, t_f].
inline Waveform sample_envelope(const PulseParameterization& p, double dt) {
  p.validate();
  if (!(dt > 0.0)) throw ConfigError("sample_envelope: dt must be positive");
  const auto n = static_cast<std::size_t>(std::llround(p.t_f / dt));
  if (n < 1000) throw ConfigError("sample_envelope: dt must divide t_f into >= 1000 steps");
  Waveform w;
  w.dt = dt;
  w.omega_x.resize(n + 1);
  w.omega_y.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    w.omega_x[i] = p.omega_x_at(t);
    w.omega_y[i] = p.omega_y_at(t);
  }
  return w;
}

namespace detail {
inline std::vector<double> filter_channel(const std::vector<double>& x, double dt,
                                          double omega_c) {
  // Zero-extension outside [0, t_f]; padding is far wider than the Gaussian
  // kernel (width sqrt(2)/omega_c ~ 0.5 ns at the default cutoff).
  const double kernel_width_ns = std::sqrt(2.0) / omega_c;
  const auto pad = static_cast<std::size_t>(std::ceil(4.0 * kernel_width_ns / dt)) + 16;
  const std::size_t n = next_pow2(x.size() + 2 * pad);
  std::vector<std::complex<double>> buf(n, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) buf[i + pad] = x[i];
  fft_inplace(buf);
  for (std::size_t k = 0; k < n; ++k) {
    const double freq_index = (k <= n / 2) ? static_cast<double>(k)
                                           : static_cast<double>(k) - static_cast<double>(n);
    const double omega = kTwoPi * freq_index / (static_cast<double>(n) * dt);  // rad/ns
    const double ratio = omega / omega_c;
    buf[k] *= std::exp(-ratio * ratio);
  }
  fft_inplace(buf, /*inverse=*/true);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = buf[i + pad].real();
  return out;
}
}  // namespace detail

inline Waveform apply_filter(const Waveform& w, const FilterModel& f) {
  f.validate();
  if (w.filtered) throw ConfigError("apply_filter: waveform already filtered");
  Waveform out;
  out.dt = w.dt;
  out.filtered = true;
  const double omega_c = f.omega_c_rad_per_ns();
  out.omega_x = detail::filter_channel(w.omega_x, w.dt, omega_c);
  out.omega_y = detail::filter_channel(w.omega_y, w.dt, omega_c);
  return out;
}

struct FieldReport {
  double combined = 0.0;  // max_t sqrt(Ox^2 + Oy^2) [mT]
  double max_x = 0.0;
  double max_y = 0.0;
};

inline FieldReport max_field(const Waveform& w) {
  FieldReport r;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double x = std::abs(w.omega_x[i]);
    const double y = std::abs(w.omega_y[i]);
    r.max_x = std::max(r.max_x, x);
    r.max_y = std::max(r.max_y, y);
    r.combined = std::max(r.combined, std::hypot(x, y));
  }
  return r;
}

inline double channel_energy(const std::vector<double>& x, double dt) {
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    e += 0.5 * (x[i] * x[i] + x[i + 1] * x[i + 1]) * dt;
  }
  return e;
}

}  // namespace spinforge
