#pragma once

// Damped-cosine decay fit used by the dephasing experiments:
//   y(t) = 1/2 + 1/2 cos(2 pi f t) exp(-(t/T2)^a)
// with f held fixed. Two free parameters (T2, a), fitted by a coarse grid
// scan followed by a compass refinement; robust, derivative-free.

#include <cmath>
#include <limits>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

struct DecayFit {
  double t2_ns = 0.0;
  double exponent = 2.0;
  double residual_rms = 0.0;
  bool no_decay = false;
};

namespace detail {

inline double decay_rms(const std::vector<double>& t_ns, const std::vector<double>& y,
                        double f_mhz, double t2_ns, double a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t_ns.size(); ++i) {
    const double envelope = std::exp(-std::pow(t_ns[i] / t2_ns, a));
    const double model = 0.5 + 0.5 * std::cos(kRadPerMHzNs * f_mhz * t_ns[i]) * envelope;
    acc += (y[i] - model) * (y[i] - model);
  }
  return std::sqrt(acc / static_cast<double>(t_ns.size()));
}

}  // namespace detail

inline DecayFit fit_damped_cosine(const std::vector<double>& t_ns,
                                  const std::vector<double>& y, double f_mhz,
                                  double a_min = 1.0, double a_max = 3.0) {
  if (t_ns.size() != y.size() || t_ns.size() < 8) {
    throw ConfigError("fit_damped_cosine: need matching series with >= 8 points");
  }
  const double t_span = t_ns.back();
  const double t2_lo = 0.02 * t_span;
  const double t2_hi = 50.0 * t_span;

  double best_t2 = t2_hi, best_a = 2.0;
  double best = std::numeric_limits<double>::infinity();
  const int nt = 60, na = 21;
  for (int i = 0; i < nt; ++i) {
    const double t2 = t2_lo * std::pow(t2_hi / t2_lo, static_cast<double>(i) / (nt - 1));
    for (int j = 0; j < na; ++j) {
      const double a = a_min + (a_max - a_min) * static_cast<double>(j) / (na - 1);
      const double r = detail::decay_rms(t_ns, y, f_mhz, t2, a);
      if (r < best) {
        best = r;
        best_t2 = t2;
        best_a = a;
      }
    }
  }

  // compass refinement in (log t2, a)
  double lt = std::log(best_t2), a = best_a;
  double step_lt = 0.15, step_a = 0.1;
  while (step_lt > 1e-6 || step_a > 1e-6) {
    bool improved = false;
    for (const auto& [dlt, da] : {std::pair{step_lt, 0.0}, std::pair{-step_lt, 0.0},
                                  std::pair{0.0, step_a}, std::pair{0.0, -step_a}}) {
      const double cand_a = std::clamp(a + da, a_min, a_max);
      const double cand_lt = std::clamp(lt + dlt, std::log(t2_lo), std::log(t2_hi));
      const double r = detail::decay_rms(t_ns, y, f_mhz, std::exp(cand_lt), cand_a);
      if (r < best) {
        best = r;
        lt = cand_lt;
        a = cand_a;
        improved = true;
        break;
      }
    }
    if (!improved) {
      step_lt *= 0.5;
      step_a *= 0.5;
    }
  }

  DecayFit fit;
  fit.t2_ns = std::exp(lt);
  fit.exponent = a;
  fit.residual_rms = best;
  // essentially undamped over the sampled window
  fit.no_decay = fit.t2_ns > 10.0 * t_span &&
                 std::pow(t_span / fit.t2_ns, a) < 0.05;
  return fit;
}

}  // namespace spinforge
