#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nmopto/config.hpp"
#include "nmopto/ocoeff.hpp"

namespace nmopto {

/// En(t) from one engine run. Trajectory runs only report their checkpoints.
struct EnTrace {
  std::vector<double> t;
  std::vector<double> En;
  double min_symplectic = 1.0;
  std::size_t physicality_warnings = 0;
  double max_trace_stderr = 0.0;  // trajectories only
  FockDims dims{};
  std::vector<std::pair<double, Eigen::MatrixXcd>> snapshots;  // only with cfg.snapshots
};

OCoefficientSeries compute_coefficients(const RunConfig& cfg, const TimeGrid& grid);
EnTrace compute_entanglement(const RunConfig& cfg);

/// First time En reaches threshold, linearly interpolated between samples; NaN when never reached.
double onset_time(const EnTrace& tr, double threshold);
/// En at the sample closest to time t.
double value_at(const EnTrace& tr, double t);
double max_value(const EnTrace& tr);

struct ScenarioResult {
  std::vector<std::filesystem::path> files;
  std::map<std::string, double> metrics;
  std::vector<std::string> warnings;
};

/// Runs the configured scenario and writes CSV/SVG, resolved_config.json and manifest.json
/// into cfg.out_dir.
ScenarioResult run_scenario(const RunConfig& cfg);

/// Shortest decimal text that round-trips, used in column and file names.
std::string short_label(double v);

}  // namespace nmopto
