#pragma once

// Welch-averaged periodogram and a log-log slope fit, used to verify that
// synthesized trajectories carry the requested spectral exponent.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/fft.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

struct PsdEstimate {
  std::vector<double> f_hz;  // positive frequencies
  std::vector<double> s;     // two-sided density, MHz^2/(rad/s)
  double df_hz = 0.0;
};

// Welch estimate with Hann windows and 50% overlap. dt in seconds; output
// units match analytic_spectrum.
class WelchAccumulator {
 public:
  WelchAccumulator(std::size_t segment, double dt_seconds)
      : segment_(segment), dt_s_(dt_seconds), accum_(segment / 2, 0.0) {
    if (segment == 0 || (segment & (segment - 1)) != 0) {
      throw ConfigError("WelchAccumulator: segment length must be a power of two");
    }
    window_.resize(segment_);
    double w2 = 0.0;
    for (std::size_t i = 0; i < segment_; ++i) {
      window_[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) /
                                        static_cast<double>(segment_));
      w2 += window_[i] * window_[i];
    }
    window_norm_ = w2 / static_cast<double>(segment_);
  }

  void add_trajectory(const std::vector<double>& samples) {
    const std::size_t hop = segment_ / 2;
    if (samples.size() < segment_) return;
    std::vector<std::complex<double>> buf(segment_);
    for (std::size_t start = 0; start + segment_ <= samples.size(); start += hop) {
      double mean = 0.0;
      for (std::size_t i = 0; i < segment_; ++i) mean += samples[start + i];
      mean /= static_cast<double>(segment_);
      for (std::size_t i = 0; i < segment_; ++i) {
        buf[i] = (samples[start + i] - mean) * window_[i];
      }
      fft_inplace(buf);
      for (std::size_t k = 0; k < segment_ / 2; ++k) accum_[k] += std::norm(buf[k]);
      ++count_;
    }
  }

  PsdEstimate estimate() const {
    if (count_ == 0) throw NumericalError("WelchAccumulator: no segments accumulated");
    PsdEstimate out;
    out.df_hz = 1.0 / (dt_s_ * static_cast<double>(segment_));
    const double scale = dt_s_ / (kTwoPi * static_cast<double>(segment_) * window_norm_ *
                                  static_cast<double>(count_));
    out.f_hz.resize(segment_ / 2 - 1);
    out.s.resize(segment_ / 2 - 1);
    for (std::size_t k = 1; k < segment_ / 2; ++k) {
      out.f_hz[k - 1] = static_cast<double>(k) * out.df_hz;
      out.s[k - 1] = accum_[k] * scale;
    }
    return out;
  }

 private:
  std::size_t segment_;
  double dt_s_;
  std::vector<double> window_;
  double window_norm_ = 1.0;
  std::vector<double> accum_;
  std::size_t count_ = 0;
};

// Least-squares slope of log10(S) vs log10(f) over [f_min, f_max], with the
// periodogram first averaged into logarithmic bins so every decade carries
// equal weight.
inline double fit_loglog_slope(const PsdEstimate& psd, double f_min, double f_max,
                               int bins_per_decade = 8) {
  const double lmin = std::log10(f_min);
  const double lmax = std::log10(f_max);
  const int nbins = std::max(2, static_cast<int>(std::ceil((lmax - lmin) * bins_per_decade)));
  std::vector<double> sum_s(nbins, 0.0), sum_lf(nbins, 0.0);
  std::vector<int> counts(nbins, 0);
  for (std::size_t i = 0; i < psd.f_hz.size(); ++i) {
    const double f = psd.f_hz[i];
    if (f < f_min || f > f_max || psd.s[i] <= 0.0) continue;
    int b = static_cast<int>((std::log10(f) - lmin) / (lmax - lmin) * nbins);
    if (b < 0) b = 0;
    if (b >= nbins) b = nbins - 1;
    sum_s[b] += psd.s[i];
    sum_lf[b] += std::log10(f);
    ++counts[b];
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (int b = 0; b < nbins; ++b) {
    if (counts[b] == 0) continue;
    const double x = sum_lf[b] / counts[b];
    const double y = std::log10(sum_s[b] / counts[b]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw NumericalError("fit_loglog_slope: not enough populated bins");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace spinforge
