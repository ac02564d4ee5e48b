#pragma once

// Robust-control cost K = J1 + <J2,U-eps> + xi*F for one candidate pulse.
//
// J2 is the leading-order electrical-noise contribution. The noise response
// R(t) is built in the same effective picture the dynamics use: the noise
// couples through dH/d(U-eps), i.e. the doublon projector plus the exchange
// derivatives of J_p, J_m in the computational block. The doublon sector is
// decoupled there, so only the 4x4 block R4(t) = U_I^dag(t) N U_I(t) enters
// the projected traces, and J2 reproduces the small-sigma limit of the
// Monte-Carlo ensemble infidelity.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "spinforge/evolve.hpp"
#include "spinforge/model.hpp"
#include "spinforge/noise.hpp"
#include "spinforge/pulse.hpp"

namespace spinforge {

struct CostBreakdown {
  double j1 = 0.0;
  double j2 = 0.0;
  double fluence = 0.0;  // mT^2 * ns
  double xi = 0.0;
  double total = 0.0;
};

struct CostOptions {
  double dt = 0.0;                // propagation step; 0 -> waveform grid
  std::size_t j2_grid_max = 2000; // quadrature nodes for the double integral
};

struct NoiseResponseCache {
  std::vector<double> grid;     // time samples [ns]
  std::vector<Matrix4cd> r4;    // computational block of R(t)
  std::vector<double> traces;   // Tr[R_4x4(t)]
  double doublon_response = 1.0;  // d(U-eps+J_p+J_m)/d(U-eps)

  // full-space operator, doublon sector included
  Matrix5cd r_op(std::size_t i) const {
    Matrix5cd r = Matrix5cd::Zero();
    r.topLeftCorner<4, 4>() = r4[i];
    r(kDoublon, kDoublon) = doublon_response;
    return r;
  }
};

inline double j1(const SystemParams& p, const Waveform& pulses, const Matrix4cd& target,
                 const CostOptions& opt = {}) {
  EffectiveOptions eopt;
  eopt.dt = opt.dt;
  const EffectiveRun run =
      run_effective(p, SystematicError{}, &pulses, ChannelData{}, pulses.duration(), eopt);
  return infidelity(run.u_rot, target);
}

inline NoiseResponseCache build_noise_response(const SystemParams& p, const Waveform& pulses,
                                               const CostOptions& opt = {}) {
  const double t_f = pulses.duration();
  const double dt = opt.dt > 0.0 ? opt.dt : pulses.dt;
  const auto n = static_cast<std::size_t>(std::llround(t_f / dt));
  EffectiveOptions eopt;
  eopt.dt = dt;
  eopt.cache_stride = std::max<std::size_t>(1, (n + opt.j2_grid_max - 2) / (opt.j2_grid_max - 1));
  const EffectiveRun run =
      run_effective(p, SystematicError{}, &pulses, ChannelData{}, t_f, eopt);

  // dH_eff/d(U-eps): exchange derivatives in the middle block
  const double den_p = p.u_minus_eps + 0.5 * p.delta_ez;
  const double den_m = p.u_minus_eps - 0.5 * p.delta_ez;
  const double jp_prime = p.t0 * p.t0 / (den_p * den_p);
  const double jm_prime = p.t0 * p.t0 / (den_m * den_m);
  Matrix4cd noise_op = Matrix4cd::Zero();
  noise_op(kUpDown, kUpDown) = jm_prime;
  noise_op(kDownUp, kDownUp) = jm_prime;
  noise_op(kUpDown, kDownUp) = -0.5 * (jp_prime + jm_prime);
  noise_op(kDownUp, kUpDown) = -0.5 * (jp_prime + jm_prime);

  NoiseResponseCache cache;
  cache.grid = run.cache_t;
  cache.doublon_response = 1.0 - jp_prime - jm_prime;
  cache.r4.reserve(run.cache_u.size());
  cache.traces.reserve(run.cache_u.size());
  for (const Matrix4cd& u : run.cache_u) {
    cache.r4.push_back(u.adjoint() * noise_op * u);
    cache.traces.push_back(cache.r4.back().trace().real());
  }
  return cache;
}

// 1/2 Int_{t2<t1} (2pi dt)^2 C Re{Tr[(R(t1)R(t2))_4x4]}
//   - 1/16 Int Int (2pi dt)^2 C Tr[R_4x4(t1)] Tr[R_4x4(t2)].
// The first integrand is symmetric under t1 <-> t2, so the ordered integral
// equals 1/4 of the full square; both terms use trapezoidal weights. Phases
// are 2pi * MHz * ns * 1e-3 radians, hence the unit factor in the prefactor.
inline double j2(const NoiseResponseCache& cache, const CorrelationTable& corr) {
  const std::size_t n = cache.grid.size();
  if (n < 2) throw ConfigError("j2: cache too small");
  std::vector<double> w(n);
  w[0] = 0.5 * (cache.grid[1] - cache.grid[0]);
  w[n - 1] = 0.5 * (cache.grid[n - 1] - cache.grid[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    w[i] = 0.5 * (cache.grid[i + 1] - cache.grid[i - 1]);
  }

  double ordered = 0.0;  // full-square sum of C * Re{Tr[R4(t1) R4(t2)]}
  double product = 0.0;  // full-square sum of C * Tr4(t1) Tr4(t2)
  const double c0 = corr.at(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix4cd& ri = cache.r4[i];
    ordered += w[i] * w[i] * c0 * (ri * ri).trace().real();
    product += w[i] * w[i] * c0 * cache.traces[i] * cache.traces[i];
    for (std::size_t j = 0; j < i; ++j) {
      const Matrix4cd& rj = cache.r4[j];
      // Tr[A B] for Hermitian A, B
      double tr = 0.0;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          tr += ri(a, b).real() * rj(a, b).real() + ri(a, b).imag() * rj(a, b).imag();
        }
      }
      const double c = corr.at(cache.grid[i] - cache.grid[j]);
      const double ww = w[i] * w[j];
      ordered += 2.0 * ww * c * tr;
      product += 2.0 * ww * c * cache.traces[i] * cache.traces[j];
    }
  }
  const double prefactor = kRadPerMHzNs * kRadPerMHzNs;
  return prefactor * (0.25 * ordered - product / 16.0);
}

inline double j2(const NoiseResponseCache& cache, const NoiseSpec& spec) {
  const double t_f = cache.grid.back();
  return j2(cache, build_correlation_table(spec, t_f));
}

// F = Int |Ox|^2 + Int |Oy|^2 + |Int |Ox|^2 - Int |Oy|^2|  [mT^2 ns]
inline double fluence(const Waveform& pulses) {
  const double ex = channel_energy(pulses.omega_x, pulses.dt);
  const double ey = channel_energy(pulses.omega_y, pulses.dt);
  return ex + ey + std::abs(ex - ey);
}

inline CostBreakdown total_cost(const SystemParams& p, const Waveform& pulses,
                                const Matrix4cd& target, const CorrelationTable& corr,
                                double xi, const CostOptions& opt = {}) {
  CostBreakdown cb;
  cb.xi = xi;
  cb.j1 = j1(p, pulses, target, opt);
  cb.j2 = corr.values.empty() || corr.values[0] == 0.0
              ? 0.0
              : j2(build_noise_response(p, pulses, opt), corr);
  cb.fluence = fluence(pulses);
  cb.total = cb.j1 + cb.j2 + xi * cb.fluence;
  return cb;
}

inline CostBreakdown total_cost(const SystemParams& p, const Waveform& pulses,
                                const Matrix4cd& target, const NoiseSpec& spec, double xi,
                                const CostOptions& opt = {}) {
  return total_cost(p, pulses, target,
                    build_correlation_table(spec, pulses.duration()), xi, opt);
}

}  // namespace spinforge
