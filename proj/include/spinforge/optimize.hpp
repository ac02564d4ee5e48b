#pragma once

// Coefficient search minimizing K = J1 + <J2> + xi*F. Stage 1 works on the
// raw sin^3 pulses; fine-tuning re-runs the same search but filters every
// candidate waveform before evaluating the cost. Quasi-Newton (BFGS) with
// central finite-difference gradients and random restarts; a compass pattern
// search polishes non-converged runs. Deterministic for a given seed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spinforge/cost.hpp"
#include "spinforge/errors.hpp"
#include "spinforge/gates.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/pulse.hpp"
#include "spinforge/rng.hpp"

namespace spinforge {

enum class OptimizationStage { unfiltered, fine_tune };

struct OptimizationConfig {
  int k_max = 11;
  double t_f = 500.0;  // ns
  double xi = 1e-6;
  double max_field = 1.0;  // mT, per channel
  int restarts = 8;
  int max_iterations = 2000;
  std::uint64_t seed = 1;
  OptimizationStage stage = OptimizationStage::unfiltered;
  double convergence_tol = 1e-9;

  // search internals
  double fd_step = 1e-4;       // mT
  double init_range = 0.3;     // mT
  double penalty_weight = 1e3; // exterior quadratic penalty on field excess
  int plateau_length = 10;
  double sample_dt = 0.0;      // waveform grid; 0 -> t_f/5000
  CostOptions cost;
  int workers = 1;

  void validate() const {
    if (k_max < 1) throw ConfigError("OptimizationConfig: k_max must be >= 1");
    if (!(max_field > 0.0)) throw ConfigError("OptimizationConfig: max_field must be > 0");
    if (restarts < 1) throw ConfigError("OptimizationConfig: restarts must be >= 1");
  }

  double grid_dt() const { return sample_dt > 0.0 ? sample_dt : t_f / 5000.0; }
};

struct IterationRecord {
  int iteration = 0;
  double j1 = 0.0;
  double j2 = 0.0;
  double fluence = 0.0;
  double total = 0.0;
  double max_field = 0.0;
};

struct OptimizationTrace {
  std::vector<IterationRecord> iterations;  // best-so-far rows
  PulseParameterization best;
  CostBreakdown best_cost;
  bool converged = false;
  int best_restart = -1;
};

struct ConstraintReport {
  bool pass = false;
  FieldReport unfiltered;
  FieldReport filtered;
};

inline ConstraintReport constraint_check(const PulseParameterization& pulse,
                                         const FilterModel& filter,
                                         const OptimizationConfig& cfg) {
  const Waveform raw = sample_envelope(pulse, cfg.grid_dt());
  ConstraintReport r;
  r.unfiltered = max_field(raw);
  r.filtered = max_field(apply_filter(raw, filter));
  r.pass = r.unfiltered.max_x <= cfg.max_field && r.unfiltered.max_y <= cfg.max_field &&
           r.filtered.max_x <= cfg.max_field && r.filtered.max_y <= cfg.max_field;
  return r;
}

namespace detail {

struct Objective {
  const SystemParams* p;
  const Matrix4cd* target;
  const CorrelationTable* corr;
  const OptimizationConfig* cfg;
  const FilterModel* filter;  // set in the fine-tune stage

  PulseParameterization unpack(const Eigen::VectorXd& x) const {
    PulseParameterization pulse = make_pulse(cfg->k_max, cfg->t_f);
    for (int k = 0; k < cfg->k_max; ++k) {
      pulse.a[k] = x(k);
      pulse.b[k] = x(cfg->k_max + k);
    }
    return pulse;
  }

  struct Eval {
    CostBreakdown cost;
    double peak = 0.0;       // per-channel max of the unfiltered waveform
    double penalized = 0.0;
  };

  Eval operator()(const Eigen::VectorXd& x) const {
    const PulseParameterization pulse = unpack(x);
    Waveform wave = sample_envelope(pulse, cfg->grid_dt());
    const FieldReport field = max_field(wave);
    if (filter) wave = apply_filter(wave, *filter);
    Eval e;
    e.peak = std::max(field.max_x, field.max_y);
    e.cost = total_cost(*p, wave, *target, *corr, cfg->xi, cfg->cost);
    const double excess = std::max(0.0, e.peak - cfg->max_field);
    e.penalized = e.cost.total + cfg->penalty_weight * excess * excess;
    return e;
  }
};

struct RestartResult {
  Eigen::VectorXd best_x;
  CostBreakdown best_cost;
  double best_peak = 0.0;
  bool has_feasible = false;
  bool converged = false;
  std::vector<IterationRecord> records;
};

inline Eigen::VectorXd fd_gradient(const Objective& obj, const Eigen::VectorXd& x,
                                   double h, int workers) {
  const auto d = static_cast<std::size_t>(x.size());
  Eigen::VectorXd g(x.size());
  parallel_for(
      d,
      [&](std::size_t i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(static_cast<Eigen::Index>(i)) += h;
        xm(static_cast<Eigen::Index>(i)) -= h;
        g(static_cast<Eigen::Index>(i)) = (obj(xp).penalized - obj(xm).penalized) / (2.0 * h);
      },
      workers);
  return g;
}

inline void consider(RestartResult& r, const Objective& obj, const Eigen::VectorXd& x,
                     const Objective::Eval& e, double max_field) {
  if (e.peak > max_field) return;
  if (!r.has_feasible || e.cost.total < r.best_cost.total) {
    r.has_feasible = true;
    r.best_x = x;
    r.best_cost = e.cost;
    r.best_peak = e.peak;
  }
}

inline RestartResult run_bfgs(const Objective& obj, Eigen::VectorXd x) {
  const OptimizationConfig& cfg = *obj.cfg;
  const auto d = x.size();
  RestartResult res;
  Objective::Eval cur = obj(x);
  consider(res, obj, x, cur, cfg.max_field);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g = fd_gradient(obj, x, cfg.fd_step, cfg.workers);
  int plateau = 0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Eigen::VectorXd dir = -(h_inv * g);
    double slope = g.dot(dir);
    if (slope >= 0.0) {  // reset a corrupted quasi-Newton model
      h_inv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    if (g.norm() < 1e-12) {
      res.converged = true;
      break;
    }

    double step = 1.0;
    Objective::Eval next;
    Eigen::VectorXd x_next;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_next = x + step * dir;
      next = obj(x_next);
      if (next.penalized <= cur.penalized + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd g_next = fd_gradient(obj, x_next, cfg.fd_step, cfg.workers);
    const Eigen::VectorXd s = x_next - x;
    const Eigen::VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = h_inv * y;
      const double yhy = y.dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
               (hy * s.transpose() + s * hy.transpose()) / sy;
    }

    const double improvement = cur.penalized - next.penalized;
    x = x_next;
    cur = next;
    g = g_next;
    consider(res, obj, x, cur, cfg.max_field);
    res.records.push_back({iter, res.best_cost.j1, res.best_cost.j2, res.best_cost.fluence,
                           res.has_feasible ? res.best_cost.total : cur.cost.total,
                           res.best_peak});
    plateau = improvement < cfg.convergence_tol ? plateau + 1 : 0;
    if (plateau >= cfg.plateau_length) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// Compass search; keeps the same feasibility bookkeeping. Used to polish
// restarts that did not reach the BFGS plateau.
inline void run_pattern_search(const Objective& obj, RestartResult& res,
                               Eigen::VectorXd x, double initial_step) {
  const OptimizationConfig& cfg = *obj.cfg;
  Objective::Eval cur = obj(x);
  consider(res, obj, x, cur, cfg.max_field);
  double step = initial_step;
  int evals = 0;
  const int budget = 200 * static_cast<int>(x.size());
  while (step > 1e-7 && evals < budget) {
    bool improved = false;
    for (Eigen::Index i = 0; i < x.size() && !improved; ++i) {
      for (const double sgn : {1.0, -1.0}) {
        Eigen::VectorXd trial = x;
        trial(i) += sgn * step;
        const Objective::Eval e = obj(trial);
        ++evals;
        if (e.penalized < cur.penalized) {
          x = trial;
          cur = e;
          consider(res, obj, x, cur, cfg.max_field);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
}

inline OptimizationTrace run_multistart(const Objective& obj,
                                        const std::vector<Eigen::VectorXd>& starts) {
  const OptimizationConfig& cfg = *obj.cfg;
  std::vector<RestartResult> results(starts.size());
  // Restarts are the independent concurrent units; each result lands in its
  // own slot so the outcome does not depend on scheduling.
  parallel_for(
      starts.size(),
      [&](std::size_t r) {
        RestartResult res = run_bfgs(obj, starts[r]);
        if (!res.converged && res.has_feasible) {
          run_pattern_search(obj, res, res.best_x, 10.0 * cfg.fd_step);
        }
        results[r] = std::move(res);
      },
      cfg.workers);

  OptimizationTrace trace;
  double best = 0.0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (!results[r].has_feasible) continue;
    if (trace.best_restart < 0 || results[r].best_cost.total < best) {
      best = results[r].best_cost.total;
      trace.best_restart = static_cast<int>(r);
    }
    trace.converged = trace.converged || results[r].converged;
  }
  if (trace.best_restart < 0) {
    throw ConstraintViolation("optimize: no feasible pulse found within the field constraint");
  }
  const RestartResult& winner = results[static_cast<std::size_t>(trace.best_restart)];
  trace.iterations = winner.records;
  trace.best = obj.unpack(winner.best_x);
  trace.best_cost = winner.best_cost;
  return trace;
}

}  // namespace detail

inline OptimizationTrace optimize_stage1(const OptimizationConfig& cfg, const SystemParams& p,
                                         const Matrix4cd& target, const NoiseSpec& spec) {
  cfg.validate();
  if (cfg.stage != OptimizationStage::unfiltered) {
    throw ConfigError("optimize_stage1: config stage must be 'unfiltered'");
  }
  const CorrelationTable corr = build_correlation_table(spec, cfg.t_f);
  detail::Objective obj{&p, &target, &corr, &cfg, nullptr};
  std::vector<Eigen::VectorXd> starts;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd x(2 * cfg.k_max);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = rng.uniform(-cfg.init_range, cfg.init_range);
    }
    starts.push_back(std::move(x));
  }
  return detail::run_multistart(obj, starts);
}

inline OptimizationTrace optimize_fine_tune(const OptimizationConfig& cfg,
                                            const SystemParams& p, const Matrix4cd& target,
                                            const NoiseSpec& spec, const FilterModel& filter,
                                            const PulseParameterization& start) {
  cfg.validate();
  if (start.k_max != cfg.k_max || start.t_f != cfg.t_f) {
    throw ConfigError("optimize_fine_tune: start pulse does not match the config");
  }
  const CorrelationTable corr = build_correlation_table(spec, cfg.t_f);
  detail::Objective obj{&p, &target, &corr, &cfg, &filter};
  Eigen::VectorXd x0(2 * cfg.k_max);
  for (int k = 0; k < cfg.k_max; ++k) {
    x0(k) = start.a[k];
    x0(cfg.k_max + k) = start.b[k];
  }
  std::vector<Eigen::VectorXd> starts{x0};
  for (int r = 1; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(cfg.seed ^ 0xf1e7u, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd x = x0;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.02 * rng.normal();
    starts.push_back(std::move(x));
  }
  return detail::run_multistart(obj, starts);
}

}  // namespace spinforge
