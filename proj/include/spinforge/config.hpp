#pragma once

// Run configuration: flat key = value text with dotted section prefixes
// (system.t0_mhz = 900). CLI flags mirror the keys (--system.t0-mhz 900).
// Defaults reproduce the reference device parameters.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/model.hpp"
#include "spinforge/noise.hpp"
#include "spinforge/optimize.hpp"
#include "spinforge/pulse.hpp"

namespace spinforge {

struct RunConfig {
  std::string command;
  SystemParams system;
  NoiseSpec noise;
  OptimizationConfig optimization;
  FilterModel filter;
  std::string output_dir = "out";
  std::uint64_t master_seed = 20240807;
  std::size_t n_realizations = 1000;
  int threads = 1;
  std::string gate = "cnot";          // cnot | x1 | h2
  std::string pulse_file;             // for evaluate / export-pulse
  std::string engine = "effective";   // effective | full
  std::vector<double> sigma_list_mhz = {600, 1200, 2400, 4800, 9600, 20000, 40000};
  std::vector<double> alpha_t0_list_mhz = {-108, -72, -36, -18, 0, 18, 36, 72, 108};
  std::vector<double> alpha_list = {0.7, 0.8, 0.9, 1.01};
  double evaluate_sigma_mhz = 2400.0;

  void validate() const {
    system.validate();
    noise.validate();
    optimization.validate();
    filter.validate();
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
    if (n_realizations < 1) throw ConfigError("run.n_realizations must be >= 1");
    if (engine != "effective" && engine != "full") {
      throw ConfigError("run.engine must be 'effective' or 'full'");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) ss << ",";
    ss << v[i];
  }
  return ss.str();
}

}  // namespace detail

// Applies one key = value pair; throws ConfigError with the key name on
// unknown keys or malformed values.
inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (...) {
      throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    }
  };
  auto as_int = [&] {
    try {
      return std::stoll(value);
    } catch (...) {
      throw ConfigError("config: bad integer value for '" + key + "': " + value);
    }
  };

  if (key == "system.ebar_z_mhz") cfg.system.ebar_z = as_double();
  else if (key == "system.delta_ez_mhz") cfg.system.delta_ez = as_double();
  else if (key == "system.t0_mhz") cfg.system.t0 = as_double();
  else if (key == "system.u_minus_eps_mhz") cfg.system.u_minus_eps = as_double();
  else if (key == "system.eta") cfg.system.eta = as_double();
  else if (key == "system.g_factor_rate_mhz_per_mt") cfg.system.g_factor_rate = as_double();
  else if (key == "noise.alpha") cfg.noise.alpha = as_double();
  else if (key == "noise.sigma_mhz") cfg.noise.sigma = as_double();
  else if (key == "noise.f_low_hz") cfg.noise.f_low = as_double();
  else if (key == "noise.f_high_hz") cfg.noise.f_high = as_double();
  else if (key == "noise.white_floor") cfg.noise.white_floor = as_double();
  else if (key == "optimization.k_max") cfg.optimization.k_max = static_cast<int>(as_int());
  else if (key == "optimization.t_f_ns") cfg.optimization.t_f = as_double();
  else if (key == "optimization.xi") cfg.optimization.xi = as_double();
  else if (key == "optimization.max_field_mt") cfg.optimization.max_field = as_double();
  else if (key == "optimization.restarts") cfg.optimization.restarts = static_cast<int>(as_int());
  else if (key == "optimization.max_iterations") {
    cfg.optimization.max_iterations = static_cast<int>(as_int());
  } else if (key == "optimization.seed") {
    cfg.optimization.seed = static_cast<std::uint64_t>(as_int());
  } else if (key == "optimization.convergence_tol") {
    cfg.optimization.convergence_tol = as_double();
  } else if (key == "optimization.sample_dt_ns") {
    cfg.optimization.sample_dt = as_double();
  } else if (key == "optimization.cost_dt_ns") {
    cfg.optimization.cost.dt = as_double();
  } else if (key == "optimization.j2_grid_max") {
    cfg.optimization.cost.j2_grid_max = static_cast<std::size_t>(as_int());
  } else if (key == "filter.f_c_mhz") {
    cfg.filter.f_c_mhz = as_double();
  } else if (key == "run.output_dir") cfg.output_dir = value;
  else if (key == "run.master_seed") cfg.master_seed = static_cast<std::uint64_t>(as_int());
  else if (key == "run.n_realizations") cfg.n_realizations = static_cast<std::size_t>(as_int());
  else if (key == "run.threads") cfg.threads = static_cast<int>(as_int());
  else if (key == "run.gate") cfg.gate = value;
  else if (key == "run.pulse_file") cfg.pulse_file = value;
  else if (key == "run.engine") cfg.engine = value;
  else if (key == "run.sigma_list_mhz") cfg.sigma_list_mhz = detail::parse_list(value);
  else if (key == "run.alpha_t0_list_mhz") cfg.alpha_t0_list_mhz = detail::parse_list(value);
  else if (key == "run.alpha_list") cfg.alpha_list = detail::parse_list(value);
  else if (key == "run.evaluate_sigma_mhz") cfg.evaluate_sigma_mhz = as_double();
  else if (key == "run.command") cfg.command = value;
  else throw ConfigError("config: unknown key '" + key + "'");
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    try {
      apply_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// Serializes every key, suitable both as a manifest and for replay.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "run.command = " << cfg.command << "\n";
  ss << "system.ebar_z_mhz = " << cfg.system.ebar_z << "\n";
  ss << "system.delta_ez_mhz = " << cfg.system.delta_ez << "\n";
  ss << "system.t0_mhz = " << cfg.system.t0 << "\n";
  ss << "system.u_minus_eps_mhz = " << cfg.system.u_minus_eps << "\n";
  ss << "system.eta = " << cfg.system.eta << "\n";
  ss << "system.g_factor_rate_mhz_per_mt = " << cfg.system.g_factor_rate << "\n";
  ss << "noise.alpha = " << cfg.noise.alpha << "\n";
  ss << "noise.sigma_mhz = " << cfg.noise.sigma << "\n";
  ss << "noise.f_low_hz = " << cfg.noise.f_low << "\n";
  ss << "noise.f_high_hz = " << cfg.noise.f_high << "\n";
  ss << "noise.white_floor = " << cfg.noise.white_floor << "\n";
  ss << "optimization.k_max = " << cfg.optimization.k_max << "\n";
  ss << "optimization.t_f_ns = " << cfg.optimization.t_f << "\n";
  ss << "optimization.xi = " << cfg.optimization.xi << "\n";
  ss << "optimization.max_field_mt = " << cfg.optimization.max_field << "\n";
  ss << "optimization.restarts = " << cfg.optimization.restarts << "\n";
  ss << "optimization.max_iterations = " << cfg.optimization.max_iterations << "\n";
  ss << "optimization.seed = " << cfg.optimization.seed << "\n";
  ss << "optimization.convergence_tol = " << cfg.optimization.convergence_tol << "\n";
  if (cfg.optimization.sample_dt > 0.0) {
    ss << "optimization.sample_dt_ns = " << cfg.optimization.sample_dt << "\n";
  }
  if (cfg.optimization.cost.dt > 0.0) {
    ss << "optimization.cost_dt_ns = " << cfg.optimization.cost.dt << "\n";
  }
  ss << "optimization.j2_grid_max = " << cfg.optimization.cost.j2_grid_max << "\n";
  ss << "filter.f_c_mhz = " << cfg.filter.f_c_mhz << "\n";
  ss << "run.output_dir = " << cfg.output_dir << "\n";
  ss << "run.master_seed = " << cfg.master_seed << "\n";
  ss << "run.n_realizations = " << cfg.n_realizations << "\n";
  ss << "run.threads = " << cfg.threads << "\n";
  ss << "run.gate = " << cfg.gate << "\n";
  if (!cfg.pulse_file.empty()) ss << "run.pulse_file = " << cfg.pulse_file << "\n";
  ss << "run.engine = " << cfg.engine << "\n";
  ss << "run.sigma_list_mhz = " << detail::format_list(cfg.sigma_list_mhz) << "\n";
  ss << "run.alpha_t0_list_mhz = " << detail::format_list(cfg.alpha_t0_list_mhz) << "\n";
  ss << "run.alpha_list = " << detail::format_list(cfg.alpha_list) << "\n";
  ss << "run.evaluate_sigma_mhz = " << cfg.evaluate_sigma_mhz << "\n";
  return ss.str();
}

}  // namespace spinforge
