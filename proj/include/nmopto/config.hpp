#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmopto/fock.hpp"
#include "nmopto/kernel.hpp"
#include "nmopto/params.hpp"
#include "nmopto/thermal.hpp"

namespace nmopto {

enum class Scenario { fig2, fig3, fig4, fig5, custom };
enum class Engine { moments, fock_master, trajectories };
enum class BathKind { ou, markov, tabulated };
enum class SolverChoice { automatic, closed, grid };

enum class ValueSource { builtin, scenario, file, flag };

/// One resolved "section.key" entry and where its value came from.
struct ConfigEntry {
  std::string value;
  ValueSource source = ValueSource::builtin;
};

struct SweepSpec {
  std::string parameter;  // gamma | omega_env | delta | coupling | decay | temperature
  std::vector<double> values;
};

struct RunConfig {
  Scenario scenario = Scenario::custom;

  LinearizedSystem sys;
  std::optional<PhysicalParams> physical;  // set when the raw cavity parameters were given

  BathKind bath = BathKind::ou;
  OUKernel ou{2.0, 0.6, 0.0};
  std::filesystem::path kernel_file;
  double temperature = 0.0;
  double omega_ir = 0.1;
  ThermalKernelMethod thermal_method = ThermalKernelMethod::quadrature;
  BathCoupling coupling{0.0, 1.0};

  double dt = 0.01;
  double t_final = 30.0;

  Engine engine = Engine::moments;
  std::size_t paths = 2000;
  std::uint64_t seed = 1;
  FockDims dims{10, 10};
  bool include_f5 = true;
  SolverChoice solver = SolverChoice::automatic;
  double trajectory_stride = 1.0;
  unsigned threads = 0;

  std::vector<double> gammas;  // per-scenario gamma list (fig2, fig3, fig5)
  double probe_time = 15.0;
  double onset_threshold = 0.1;

  std::optional<SweepSpec> sweep;

  std::filesystem::path out_dir = "out";
  bool csv = true;
  bool svg = true;
  bool snapshots = false;  // binary density-matrix snapshots (format "bin")

  std::map<std::string, ConfigEntry> entries;  // every key after layering
  std::vector<std::string> assumptions;        // substituted values worth flagging

  bool thermal() const { return temperature > 0.0 || coupling.ca != 0.0; }
};

struct ConfigOverride {
  std::string key;  // "section.key"
  std::string value;
};

/// Sectioned key = value text (INI). Layers: built-in defaults, scenario presets, file, flags.
/// Unknown sections or keys, malformed numbers and inconsistent combinations throw ConfigError.
RunConfig parse_config(const std::string& text, std::optional<Scenario> scenario = std::nullopt,
                       const std::vector<ConfigOverride>& flags = {});
RunConfig load_config(const std::filesystem::path& path, std::optional<Scenario> scenario = std::nullopt,
                      const std::vector<ConfigOverride>& flags = {});

/// Resolved configuration with per-key provenance, as JSON text.
std::string resolved_config_json(const RunConfig& cfg);

/// Applies one sweep parameter value to a copy of the configuration.
RunConfig with_parameter(const RunConfig& cfg, const std::string& parameter, double value);

/// Kernel described by the bath section (reads the tabulated file if needed).
KernelSpec make_kernel(const RunConfig& cfg);

std::string to_string(Scenario s);
std::string to_string(Engine e);
Scenario parse_scenario(const std::string& s);

}  // namespace nmopto
