#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinforge/pulse.hpp"

using namespace spinforge;

TEST_CASE("envelope sampling and the sin^3 endpoint property") {
  PulseParameterization p = make_pulse(11, 500.0);
  const Waveform zero = sample_envelope(p, 0.1);
  CHECK(max_field(zero).combined == 0.0);

  p.a[0] = 1.0;
  const Waveform w = sample_envelope(p, 0.1);
  CHECK(w.omega_x.front() == 0.0);
  CHECK(w.omega_x.back() == Catch::Approx(0.0).margin(1e-12));
  CHECK(w.omega_x[w.size() / 2] == Catch::Approx(1.0).epsilon(1e-9));

  // slopes vanish at both ends
  p.a[10] = -0.4;
  p.b[3] = 0.7;
  const Waveform v = sample_envelope(p, 0.1);
  const double peak = std::max(max_field(v).max_x, max_field(v).max_y);
  for (const auto* ch : {&v.omega_x, &v.omega_y}) {
    const double d0 = ((*ch)[1] - (*ch)[0]) / v.dt;
    const double d1 = ((*ch)[ch->size() - 1] - (*ch)[ch->size() - 2]) / v.dt;
    CHECK(std::abs(d0) < 1e-4 * peak);
    CHECK(std::abs(d1) < 1e-4 * peak);
  }

  CHECK_THROWS_AS(sample_envelope(p, -1.0), ConfigError);
  CHECK_THROWS_AS(sample_envelope(p, 2.0), ConfigError);  // fewer than 1000 steps
}

TEST_CASE("filter passes slow envelopes unchanged") {
  PulseParameterization p = make_pulse(1, 500.0);
  p.a[0] = 1.0;  // 1 MHz fundamental, far below the 425.4 MHz cutoff
  const Waveform w = sample_envelope(p, 0.1);
  const Waveform f = apply_filter(w, FilterModel{});
  CHECK(f.filtered);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(f.omega_x[i] - w.omega_x[i]));
  }
  CHECK(max_diff < 1e-4);
  CHECK_THROWS_AS(apply_filter(f, FilterModel{}), ConfigError);
}

TEST_CASE("filter attenuates a tone at the cutoff by 1/e") {
  const FilterModel filter;
  const double dt = 0.05;
  const std::size_t n = 40000;
  Waveform tone;
  tone.dt = dt;
  tone.omega_x.resize(n + 1, 0.0);
  tone.omega_y.resize(n + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    tone.omega_x[i] = std::sin(kTwoPi * filter.f_c_mhz * kCyclesPerMHzNs * t);
  }
  const Waveform out = apply_filter(tone, filter);
  double peak_in = 0.0, peak_out = 0.0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
    peak_in = std::max(peak_in, std::abs(tone.omega_x[i]));
    peak_out = std::max(peak_out, std::abs(out.omega_x[i]));
  }
  CHECK(peak_out / peak_in == Catch::Approx(std::exp(-1.0)).epsilon(0.02));
}

TEST_CASE("highest CNOT basis term loses under 1% energy to the filter") {
  PulseParameterization p = make_pulse(11, 500.0);
  p.a[10] = 1.0;  // omega_{X,11}, harmonics at 21 and 63 MHz
  const Waveform w = sample_envelope(p, 0.1);
  const Waveform f = apply_filter(w, FilterModel{});
  const double before = channel_energy(w.omega_x, w.dt);
  const double after = channel_energy(f.omega_x, f.dt);
  CHECK(after <= before);  // Parseval: the filter only removes energy
  CHECK(after / before > 0.99);
}

TEST_CASE("filtering is linear and keeps endpoints near zero") {
  PulseParameterization pu = make_pulse(4, 500.0);
  PulseParameterization pv = make_pulse(4, 500.0);
  pu.a = {0.3, -0.2, 0.1, 0.05};
  pv.a = {-0.1, 0.4, 0.0, -0.3};
  const double ca = 0.7, cb = -1.3;
  PulseParameterization pw = make_pulse(4, 500.0);
  for (int k = 0; k < 4; ++k) pw.a[k] = ca * pu.a[k] + cb * pv.a[k];

  const FilterModel filter;
  const Waveform fu = apply_filter(sample_envelope(pu, 0.1), filter);
  const Waveform fv = apply_filter(sample_envelope(pv, 0.1), filter);
  const Waveform fw = apply_filter(sample_envelope(pw, 0.1), filter);
  double max_diff = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < fw.size(); ++i) {
    max_diff = std::max(max_diff,
                        std::abs(fw.omega_x[i] - ca * fu.omega_x[i] - cb * fv.omega_x[i]));
    peak = std::max(peak, std::abs(fw.omega_x[i]));
  }
  CHECK(max_diff < 1e-10);
  CHECK(std::abs(fw.omega_x.front()) < 1e-3 * peak);
  CHECK(std::abs(fw.omega_x.back()) < 1e-3 * peak);
}

TEST_CASE("max field reports per-channel and combined peaks") {
  PulseParameterization p = make_pulse(3, 500.0);
  p.a[0] = 0.6;
  const Waveform w = sample_envelope(p, 0.1);
  const FieldReport r = max_field(w);
  CHECK(r.max_x == Catch::Approx(0.6).epsilon(1e-9));
  CHECK(r.max_y == 0.0);
  CHECK(r.combined == Catch::Approx(0.6).epsilon(1e-9));
}
