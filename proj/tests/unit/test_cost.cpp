#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinforge/cost.hpp"
#include "spinforge/gates.hpp"

using namespace spinforge;

namespace {

SystemParams paper_params() { return SystemParams{}; }

Waveform zero_wave(double t_f) { return sample_envelope(make_pulse(1, t_f), t_f / 1000.0); }

}  // namespace

TEST_CASE("j1 vanishes for pulses realizing the target and is continuous") {
  const double t_f = 500.0;

  // without tunneling there is no leakage: zero drive realizes the free
  // Zeeman evolution exactly
  SystemParams decoupled = paper_params();
  decoupled.t0 = 0.0;
  const Waveform zw = zero_wave(t_f);
  const Matrix4cd self = unitarize(closed_form_free_unitary(decoupled, {}, t_f));
  CHECK(j1(decoupled, zw, self) < 1e-10);

  // with tunneling the same comparison keeps the physical leakage floor
  const SystemParams p = paper_params();
  const Matrix4cd self_p = unitarize(closed_form_free_unitary(p, {}, t_f));
  const double floor = j1(p, zw, self_p);
  CHECK(floor > 0.0);
  CHECK(floor < 5e-5);  // ~2 gamma^2 of doublon admixture

  // against CNOT the zero-drive value comes from the 2x2 closed form
  const Matrix4cd cnot = cnot_target();
  const double j1_cost = j1(p, zw, cnot);
  const double j1_oracle = infidelity(closed_form_free_unitary(p, {}, t_f), cnot);
  CHECK(j1_cost == Catch::Approx(j1_oracle).margin(1e-9));

  // continuity in the coefficients
  PulseParameterization pp = make_pulse(2, t_f);
  pp.a = {0.1, 0.0};
  const double base = j1(p, sample_envelope(pp, 0.5), cnot);
  pp.a[0] += 1e-5;
  const double bumped = j1(p, sample_envelope(pp, 0.5), cnot);
  CHECK(std::abs(bumped - base) < 1e-3);
}

TEST_CASE("noise response cache holds the effective-picture response") {
  const SystemParams p = paper_params();
  PulseParameterization pp = make_pulse(2, 500.0);
  pp.a = {0.2, -0.1};
  pp.b = {0.1, 0.05};
  const Waveform wave = sample_envelope(pp, 0.1);
  CostOptions opt;
  opt.j2_grid_max = 400;
  const NoiseResponseCache cache = build_noise_response(p, wave, opt);
  REQUIRE(cache.grid.size() >= 300);
  REQUIRE(cache.grid.front() == 0.0);
  REQUIRE(cache.grid.back() == Catch::Approx(500.0));

  // t = 0: R is the bare noise Hamiltonian up to the O(gamma^2) exchange
  // derivatives that carry the noise into the computational block
  Matrix5cd h55 = Matrix5cd::Zero();
  h55(kDoublon, kDoublon) = 1.0;
  CHECK((cache.r_op(0) - h55).cwiseAbs().maxCoeff() < 1e-4);

  // any t: Hermitian, eigenvalues {1,0,0,0,0} up to O(gamma^2), unit trace
  for (std::size_t i : {std::size_t{0}, std::size_t{37}, cache.grid.size() - 1}) {
    const Matrix5cd r = cache.r_op(i);
    CHECK(is_hermitian(r, 1e-10));
    CHECK(r.trace().real() == Catch::Approx(1.0).margin(1e-8));
    Eigen::SelfAdjointEigenSolver<Matrix5cd> es(r);
    CHECK(es.eigenvalues()(4) == Catch::Approx(1.0).margin(1e-4));
    for (int k = 0; k < 4; ++k) CHECK(std::abs(es.eigenvalues()(k)) < 1e-4);
  }

  // the 4x4 trace is conserved by the conjugation
  for (double tr : cache.traces) {
    CHECK(tr == Catch::Approx(cache.traces.front()).margin(1e-12));
  }
}

TEST_CASE("j2 scaling and positivity") {
  const SystemParams p = paper_params();
  PulseParameterization pp = make_pulse(3, 500.0);
  pp.a = {0.25, -0.12, 0.06};
  pp.b = {0.18, 0.07, -0.03};
  const Waveform wave = sample_envelope(pp, 0.1);
  CostOptions opt;
  opt.j2_grid_max = 600;
  const NoiseResponseCache cache = build_noise_response(p, wave, opt);

  NoiseSpec spec;  // sigma = 2400
  const double base = j2(cache, spec);
  CHECK(base > -1e-8);

  NoiseSpec doubled = spec;
  doubled.sigma = 2.0 * spec.sigma;
  CHECK(j2(cache, doubled) == Catch::Approx(4.0 * base).epsilon(1e-9));

  // quadrature grid refinement does not move the value appreciably
  CostOptions fine = opt;
  fine.j2_grid_max = 1200;
  const double refined = j2(build_noise_response(p, wave, fine), spec);
  CHECK(refined == Catch::Approx(base).epsilon(0.02));
}

TEST_CASE("j2 matches the Monte-Carlo ensemble at small sigma") {
  const SystemParams p = paper_params();
  const double t_f = 500.0;
  const Waveform wave = zero_wave(t_f);
  const Matrix4cd target = unitarize(closed_form_free_unitary(p, {}, t_f));

  NoiseSpec spec;
  spec.sigma = 240.0;  // a tenth of the paper strength: lowest order dominates
  CostOptions opt;
  opt.dt = 0.5;
  opt.j2_grid_max = 1000;
  const double j2_value = j2(build_noise_response(p, wave, opt), spec);

  EnsembleOptions eopt;
  eopt.dt = 0.5;
  const EnsembleResult mc = ensemble_infidelity(p, {}, spec, wave, target, 2000, 4242, eopt);
  const double j1_value = j1(p, wave, target, opt);
  CHECK(j2_value > 0.0);
  CHECK((mc.mean_infidelity - j1_value) / j2_value == Catch::Approx(1.0).margin(0.2));
}

TEST_CASE("fluence evaluates the three-term definition") {
  const double t_f = 500.0;
  CHECK(fluence(zero_wave(t_f)) == 0.0);

  PulseParameterization px = make_pulse(2, t_f);
  px.a = {0.5, 0.2};
  const Waveform wx = sample_envelope(px, 0.1);
  const double ex = channel_energy(wx.omega_x, wx.dt);
  CHECK(fluence(wx) == Catch::Approx(2.0 * ex).epsilon(1e-12));

  // equal-energy channels: asymmetry term vanishes
  PulseParameterization pxy = make_pulse(1, t_f);
  pxy.a = {0.4};
  pxy.b = {0.4};
  const Waveform wxy = sample_envelope(pxy, 0.1);
  const double exx = channel_energy(wxy.omega_x, wxy.dt);
  const double eyy = channel_energy(wxy.omega_y, wxy.dt);
  CHECK(fluence(wxy) == Catch::Approx(exx + eyy + std::abs(exx - eyy)).epsilon(1e-12));
}

TEST_CASE("total cost assembles the breakdown") {
  const SystemParams p = paper_params();
  PulseParameterization pp = make_pulse(2, 500.0);
  pp.a = {0.2, 0.1};
  const Waveform wave = sample_envelope(pp, 0.1);
  const Matrix4cd target = cnot_target();

  NoiseSpec spec;
  CostOptions opt;
  opt.j2_grid_max = 400;
  const CostBreakdown with_xi = total_cost(p, wave, target, spec, 1e-6, opt);
  CHECK(with_xi.total ==
        Catch::Approx(with_xi.j1 + with_xi.j2 + 1e-6 * with_xi.fluence).epsilon(1e-12));

  const CostBreakdown no_xi = total_cost(p, wave, target, spec, 0.0, opt);
  CHECK(no_xi.total == Catch::Approx(no_xi.j1 + no_xi.j2).epsilon(1e-12));

  // noiseless, self-realizing pulse without leakage: only the fluence term
  SystemParams decoupled = paper_params();
  decoupled.t0 = 0.0;
  NoiseSpec quiet;
  quiet.sigma = 0.0;
  const Waveform zw = zero_wave(500.0);
  const Matrix4cd self = unitarize(closed_form_free_unitary(decoupled, {}, 500.0));
  const CostBreakdown pure = total_cost(decoupled, zw, self, quiet, 1e-6, opt);
  CHECK(pure.j2 == 0.0);
  CHECK(pure.j1 < 1e-10);
  CHECK(pure.total == Catch::Approx(1e-6 * pure.fluence).margin(1e-10));
}
