#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spinforge/noise.hpp"
#include "spinforge/spectral.hpp"

using namespace spinforge;

namespace {
NoiseSpec paper_noise() { return NoiseSpec{}; }  // 1/f^1.01, sigma = 2.4 GHz
}

TEST_CASE("bank construction basics") {
  const NoiseSpec spec = paper_noise();
  const OUBank bank = build_bank(spec, 2);
  REQUIRE(bank.rates.size() == 17);  // 8 decades, 2 per decade, endpoints inclusive
  for (std::size_t i = 1; i < bank.rates.size(); ++i) CHECK(bank.rates[i] > bank.rates[i - 1]);
  double var = 0.0;
  for (double a : bank.amplitudes) var += a * a;
  CHECK(var == Catch::Approx(spec.sigma * spec.sigma).epsilon(1e-9));

  NoiseSpec quiet = spec;
  quiet.sigma = 0.0;
  const OUBank silent = build_bank(quiet, 2);
  for (double a : silent.amplitudes) CHECK(a == 0.0);
  const NoiseTrajectory traj = sample_trajectory(silent, 1.0, 100, 7);
  for (double b : traj.samples) CHECK(b == 0.0);

  NoiseSpec bad = spec;
  bad.alpha = 0.4;
  CHECK_THROWS_AS(build_bank(bad, 2), ConfigError);
}

TEST_CASE("trajectories are deterministic in the seed") {
  const OUBank bank = build_bank(paper_noise(), 2);
  const NoiseTrajectory a = sample_trajectory(bank, 0.5, 2048, 42);
  const NoiseTrajectory b = sample_trajectory(bank, 0.5, 2048, 42);
  const NoiseTrajectory c = sample_trajectory(bank, 0.5, 2048, 43);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
}

TEST_CASE("analytic spectrum: normalization, power law, band edges") {
  const NoiseSpec spec = paper_noise();
  CHECK(analytic_spectrum(spec, 1.0) / analytic_spectrum(spec, 100.0) ==
        Catch::Approx(std::pow(100.0, 1.01)).epsilon(1e-9));
  CHECK(analytic_spectrum(spec, 2e6) == 0.0);
  // saturation below f_low
  CHECK(analytic_spectrum(spec, spec.f_low / 10.0) / analytic_spectrum(spec, spec.f_low) ==
        Catch::Approx(1.0));
  // the bank's Lorentzian sum flattens below its lowest knee
  const OUBank bank = build_bank(spec, 2);
  const double flat = bank_spectrum(bank, spec.f_low / 100.0) /
                      bank_spectrum(bank, spec.f_low / 10.0);
  CHECK(flat > 0.9);
  CHECK(flat < 1.35);
}

TEST_CASE("correlation function from the spectrum") {
  const NoiseSpec spec = paper_noise();
  const double c0 = correlation(spec, 0.0);
  CHECK(c0 == Catch::Approx(5.76e6).epsilon(0.01));
  CHECK(correlation(spec, 250.0) == correlation(spec, -250.0));
  // 1/f noise is quasi-static on the gate timescale; the top decade of the
  // band (about a tenth of the variance) decorrelates by 500 ns.
  const double ratio = correlation(spec, 500.0) / c0;
  CHECK(ratio > 0.90);
  CHECK(ratio < 0.97);

  CorrelationTable table = build_correlation_table(spec, 1000.0);
  CHECK(table.at(500.0) == Catch::Approx(correlation(spec, 500.0)).epsilon(1e-4));
}

TEST_CASE("ensemble statistics: variance, stationarity, autocorrelation") {
  const NoiseSpec spec = paper_noise();
  const OUBank bank = build_bank(spec, 2);
  const std::size_t n_traj = 2000;
  const std::size_t n_samples = 51;
  const double dt = 20.0;  // ns, 1 us span
  std::vector<std::vector<double>> ens(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) {
    ens[i] = sample_trajectory(bank, dt, n_samples, derive_seed(2024, i)).samples;
  }

  // pooled mean and variance across the ensemble
  double mean = 0.0, var = 0.0;
  for (const auto& t : ens) {
    for (double b : t) mean += b;
  }
  mean /= static_cast<double>(n_traj * n_samples);
  for (const auto& t : ens) {
    for (double b : t) var += (b - mean) * (b - mean);
  }
  var /= static_cast<double>(n_traj * n_samples - 1);
  CHECK(std::sqrt(var) == Catch::Approx(spec.sigma).epsilon(0.05));

  // per-slice stationarity
  for (std::size_t k : {std::size_t{0}, std::size_t{25}, std::size_t{50}}) {
    double slice_mean = 0.0;
    for (const auto& t : ens) slice_mean += t[k];
    slice_mean /= static_cast<double>(n_traj);
    CHECK(std::abs(slice_mean) < 0.05 * spec.sigma);
  }

  // ensemble autocorrelation vs the analytic transform, lags up to 1 us
  const double c0 = correlation(spec, 0.0);
  for (std::size_t lag : {std::size_t{5}, std::size_t{25}, std::size_t{50}}) {
    double emp = 0.0;
    for (const auto& t : ens) emp += t[0] * t[lag];
    emp /= static_cast<double>(n_traj);
    const double model = correlation(spec, static_cast<double>(lag) * dt);
    CHECK(std::abs(emp - model) < 0.05 * c0);
  }

  // autocorrelation decreasing in lag (closed form of the bank)
  double prev = bank_correlation(bank, 0.0);
  CHECK(prev == Catch::Approx(spec.sigma * spec.sigma).epsilon(1e-9));
  for (double tau : {10.0, 100.0, 1000.0, 1e4, 1e6}) {
    const double c = bank_correlation(bank, tau);
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("synthesized trajectories carry the requested spectral slope") {
  NoiseSpec spec = paper_noise();
  const OUBank bank = build_bank(spec, 2);
  const double dt_s = 1e-6;
  const std::size_t n = 1 << 22;
  WelchAccumulator welch(1 << 20, dt_s);
  for (std::size_t i = 0; i < 4; ++i) {
    welch.add_trajectory(sample_trajectory(bank, dt_s * 1e9, n, derive_seed(99, i)).samples);
  }
  const PsdEstimate psd = welch.estimate();
  const double slope = fit_loglog_slope(psd, 3.0, 1e5);
  CHECK(slope == Catch::Approx(-1.01).margin(0.07));
}

TEST_CASE("white floor adds a band-limited white component") {
  NoiseSpec spec;
  spec.alpha = 2.5;
  spec.sigma = 1.0;
  spec.f_low = 1e3;
  spec.f_high = 1e5;
  spec.white_floor = 0.2 * spec.sigma * spec.sigma * kPi / (kTwoPi * spec.f_high);
  const OUBank bank = build_bank(spec, 2);
  double var = 0.0;
  for (double a : bank.amplitudes) var += a * a;
  CHECK(var == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(correlation(spec, 0.0) == Catch::Approx(1.0).epsilon(0.01));
  // the floor dominates the top of the band
  const double s_top = analytic_spectrum(spec, 0.9e5);
  CHECK(s_top == Catch::Approx(spec.white_floor).epsilon(0.05));
}
