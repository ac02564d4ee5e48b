#pragma once

// CSV, pulse-coefficient file and run-directory helpers. Output directories
// are append-only: every run writes into a fresh timestamped subdirectory.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "spinforge/errors.hpp"
#include "spinforge/noise.hpp"
#include "spinforge/pulse.hpp"

namespace spinforge {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    out_.precision(12);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ",";
      out_ << values[i];
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline std::filesystem::path make_run_dir(const std::string& output_dir,
                                          const std::string& command) {
  namespace fs = std::filesystem;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream stamp;
  stamp << command << "-" << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = fs::path(output_dir) / stamp.str();
  // never reuse an existing run directory
  int suffix = 1;
  fs::path candidate = dir;
  while (fs::exists(candidate)) {
    candidate = dir;
    candidate += "-" + std::to_string(suffix++);
  }
  fs::create_directories(candidate);
  return candidate;
}

// Pulse-coefficient file: header (k_max, t_f_ns) plus two coefficient columns.
inline void write_pulse_file(const std::filesystem::path& path,
                             const PulseParameterization& pulse) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "k_max " << pulse.k_max << "\n";
  ss << "t_f_ns " << pulse.t_f << "\n";
  ss << "# a_mT b_mT\n";
  for (int k = 0; k < pulse.k_max; ++k) {
    ss << pulse.a[k] << " " << pulse.b[k] << "\n";
  }
  write_text_file(path, ss.str());
}

inline PulseParameterization read_pulse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pulse file " + path.string());
  std::string token;
  int k_max = 0;
  double t_f = 0.0;
  if (!(in >> token >> k_max) || token != "k_max") {
    throw ConfigError("pulse file " + path.string() + ": expected 'k_max <n>'");
  }
  if (!(in >> token >> t_f) || token != "t_f_ns") {
    throw ConfigError("pulse file " + path.string() + ": expected 't_f_ns <v>'");
  }
  std::string line;
  std::getline(in, line);
  PulseParameterization pulse = make_pulse(k_max, t_f);
  int k = 0;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b)) continue;
    if (k >= k_max) throw ConfigError("pulse file " + path.string() + ": too many rows");
    pulse.a[k] = a;
    pulse.b[k] = b;
    ++k;
  }
  if (k != k_max) throw ConfigError("pulse file " + path.string() + ": missing rows");
  pulse.validate();
  return pulse;
}

inline void write_waveform_csv(const std::filesystem::path& path, const Waveform& w) {
  CsvWriter csv(path, {"time_ns", "omega_x_mT", "omega_y_mT"});
  for (std::size_t i = 0; i < w.size(); ++i) {
    csv.row({static_cast<double>(i) * w.dt, w.omega_x[i], w.omega_y[i]});
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<NoiseTrajectory>& trajectories) {
  std::vector<std::string> cols{"time_ns"};
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    cols.push_back("beta_MHz_" + std::to_string(j));
  }
  CsvWriter csv(path, cols);
  for (std::size_t i = 0; i < trajectories.front().samples.size(); ++i) {
    std::vector<double> row{static_cast<double>(i) * trajectories.front().dt};
    for (const auto& t : trajectories) row.push_back(t.samples[i]);
    csv.row(row);
  }
}

}  // namespace spinforge
