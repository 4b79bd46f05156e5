#include "nmopto/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nmopto/errors.hpp"

namespace nmopto {

namespace {

struct KeyInfo {
  const char* key;
  const char* fallback;  // built-in default; empty means "unset"
};

constexpr KeyInfo kKeys[] = {
    {"system.omega_m", "1"},       {"system.delta", "1"},          {"system.coupling", "0.1"},
    {"system.bare_detuning", ""},  {"system.g0", ""},              {"system.drive", ""},
    {"system.kappa", ""},          {"bath.kind", "ou"},            {"bath.decay", "2"},
    {"bath.gamma", "0.6"},         {"bath.omega_env", "0"},        {"bath.kernel_file", ""},
    {"bath.temperature", "0"},     {"bath.omega_ir", "0.1"},       {"bath.thermal_kernels", "quadrature"},
    {"bath.l_cavity", "0"},        {"bath.l_mirror", "1"},         {"grid.dt", "0.01"},
    {"grid.t_final", "30"},        {"run.scenario", "custom"},     {"run.engine", "moments"},
    {"run.paths", "2000"},         {"run.seed", "1"},              {"run.fock_na", "10"},
    {"run.fock_nb", "10"},         {"run.include_f5", "true"},     {"run.solver", "auto"},
    {"run.trajectory_stride", "1"}, {"run.threads", "0"},          {"scenario.gammas", ""},
    {"scenario.probe_time", "15"}, {"scenario.onset_threshold", "0.1"}, {"sweep.parameter", ""},
    {"sweep.start", ""},           {"sweep.stop", ""},             {"sweep.step", ""},
    {"sweep.values", ""},          {"output.dir", "out"},          {"output.format", "csv,svg"},
};

const char* source_name(ValueSource s) {
  switch (s) {
    case ValueSource::builtin: return "default";
    case ValueSource::scenario: return "scenario default";
    case ValueSource::file: return "file";
    case ValueSource::flag: return "flag";
  }
  return "?";
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class Layers {
 public:
  Layers() {
    for (const auto& k : kKeys) entries_[k.key] = ConfigEntry{k.fallback, ValueSource::builtin};
  }

  void set(const std::string& key, const std::string& value, ValueSource src) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second = ConfigEntry{trim(value), src};
  }

  const ConfigEntry& entry(const std::string& key) const { return entries_.at(key); }
  bool given(const std::string& key) const { return !entries_.at(key).value.empty(); }
  bool explicit_value(const std::string& key) const {
    const auto s = entries_.at(key).source;
    return s == ValueSource::file || s == ValueSource::flag;
  }

  std::string text(const std::string& key) const { return entries_.at(key).value; }

  double number(const std::string& key) const {
    const std::string& v = entries_.at(key).value;
    double x = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
      throw ConfigError(key + ": expected a number, got '" + v + "' (" + source_name(entries_.at(key).source) + ")");
    return x;
  }

  std::uint64_t unsigned_int(const std::string& key) const {
    const std::string& v = entries_.at(key).value;
    std::uint64_t x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
  }

  bool boolean(const std::string& key) const {
    const std::string v = entries_.at(key).value;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(entries_.at(key).value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      double x = 0.0;
      const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
      if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
        throw ConfigError(key + ": expected a comma separated list of numbers, got '" + entries_.at(key).value + "'");
      out.push_back(x);
    }
    return out;
  }

  const std::map<std::string, ConfigEntry>& all() const { return entries_; }

 private:
  std::map<std::string, ConfigEntry> entries_;
};

void apply_scenario_presets(Layers& L, Scenario s, std::vector<std::string>& assumptions) {
  auto preset = [&](const char* key, const char* value) { L.set(key, value, ValueSource::scenario); };
  switch (s) {
    case Scenario::fig2:
      preset("scenario.gammas", "0.6,6");
      preset("scenario.probe_time", "15");
      assumptions.push_back("decay, delta, coupling and omega_env taken from the fig3 set (2, 1, 0.1, 0)");
      break;
    case Scenario::fig3:
      preset("scenario.gammas", "0.3,0.6,1.2");
      preset("scenario.probe_time", "30");
      assumptions.push_back("gamma list 0.3, 0.6, 1.2 is a scenario default");
      break;
    case Scenario::fig4:
      preset("bath.gamma", "1");
      preset("scenario.probe_time", "20");
      preset("sweep.parameter", "omega_env");
      preset("sweep.start", "0");
      preset("sweep.stop", "2");
      preset("sweep.step", "0.1");
      assumptions.push_back("decay = 2 and the omega_env range [0, 2] are scenario defaults");
      break;
    case Scenario::fig5:
      preset("bath.decay", "4");
      preset("bath.omega_env", "0");
      preset("grid.t_final", "50");
      preset("scenario.gammas", "1.5,0.8");
      preset("sweep.parameter", "delta");
      preset("sweep.start", "1");
      preset("sweep.stop", "3");
      preset("sweep.step", "0.05");
      break;
    case Scenario::custom:
      break;
  }
}

std::vector<double> sweep_values(const Layers& L) {
  if (L.given("sweep.values")) {
    if (L.given("sweep.start") || L.given("sweep.stop") || L.given("sweep.step"))
      throw ConfigError("sweep: give either values or start/stop/step, not both");
    return L.list("sweep.values");
  }
  const double a = L.number("sweep.start"), b = L.number("sweep.stop"), h = L.number("sweep.step");
  if (!(h > 0.0) || b < a) throw ConfigError("sweep: need step > 0 and stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9)) + 1;
  if (n > 100000) throw ConfigError("sweep: too many points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + h * static_cast<double>(i);
  return v;
}

template <class E>
E pick(const Layers& L, const std::string& key, std::initializer_list<std::pair<const char*, E>> options) {
  const std::string v = L.text(key);
  for (const auto& [name, e] : options)
    if (v == name) return e;
  std::string allowed;
  for (const auto& o : options) allowed += std::string(allowed.empty() ? "" : ", ") + o.first;
  throw ConfigError(key + ": unknown value '" + v + "' (expected one of " + allowed + ")");
}

RunConfig build(const Layers& L, Scenario scenario, std::vector<std::string> assumptions) {
  RunConfig c;
  c.scenario = scenario;
  c.sys.omega_m = L.number("system.omega_m");
  if (!(c.sys.omega_m > 0.0)) throw ConfigError("system.omega_m must be positive");

  const bool raw = L.given("system.g0") || L.given("system.drive") || L.given("system.kappa") ||
                   L.given("system.bare_detuning");
  if (raw) {
    if (L.explicit_value("system.delta") || L.explicit_value("system.coupling"))
      throw ConfigError("system: give either delta/coupling or the raw cavity parameters, not both");
    PhysicalParams p;
    p.omega_m = c.sys.omega_m;
    p.omega_c = 0.0;
    p.omega_drive = L.number("system.bare_detuning");
    p.g = L.number("system.g0");
    p.drive = L.number("system.drive");
    p.kappa_a = L.number("system.kappa");
    try {
      c.sys = linearize(p, solve_mean_field(p));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("system: mean-field solution failed: ") + e.what());
    }
    c.physical = p;
  } else {
    c.sys.Delta = L.number("system.delta");
    c.sys.G = L.number("system.coupling");
  }

  c.bath = pick<BathKind>(L, "bath.kind",
                          {{"ou", BathKind::ou}, {"markov", BathKind::markov}, {"tabulated", BathKind::tabulated}});
  c.ou = OUKernel{L.number("bath.decay"), L.number("bath.gamma"), L.number("bath.omega_env")};
  if (c.ou.Gamma < 0.0) throw ConfigError("bath.decay must be non-negative");
  if (c.bath == BathKind::ou && !(c.ou.gamma > 0.0)) throw ConfigError("bath.gamma must be positive");
  c.kernel_file = L.text("bath.kernel_file");
  if (c.bath == BathKind::tabulated && c.kernel_file.empty())
    throw ConfigError("bath.kind = tabulated needs bath.kernel_file");
  c.temperature = L.number("bath.temperature");
  if (c.temperature < 0.0) throw ConfigError("bath.temperature must be non-negative");
  c.omega_ir = L.number("bath.omega_ir");
  if (!(c.omega_ir > 0.0)) throw ConfigError("bath.omega_ir must be positive");
  c.thermal_method = pick<ThermalKernelMethod>(
      L, "bath.thermal_kernels",
      {{"quadrature", ThermalKernelMethod::quadrature}, {"narrowband", ThermalKernelMethod::narrowband}});
  c.coupling = BathCoupling{L.number("bath.l_cavity"), L.number("bath.l_mirror")};

  c.dt = L.number("grid.dt");
  c.t_final = L.number("grid.t_final");
  if (!(c.dt > 0.0)) throw ConfigError("grid.dt must be positive");
  if (!(c.t_final > 0.0)) throw ConfigError("grid.t_final must be positive");
  if (c.t_final / c.dt > 1e7) throw ConfigError("grid: too many time steps");

  c.engine = pick<Engine>(L, "run.engine",
                          {{"moments", Engine::moments},
                           {"fock-master", Engine::fock_master},
                           {"trajectories", Engine::trajectories}});
  c.paths = L.unsigned_int("run.paths");
  if (c.paths == 0) throw ConfigError("run.paths must be at least 1");
  c.seed = L.unsigned_int("run.seed");
  c.dims = FockDims{static_cast<int>(L.unsigned_int("run.fock_na")), static_cast<int>(L.unsigned_int("run.fock_nb"))};
  if (c.dims.na < 2 || c.dims.nb < 2 || c.dims.size() > 4096)
    throw ConfigError("run.fock_na / run.fock_nb must be in [2, 64]");
  c.include_f5 = L.boolean("run.include_f5");
  c.solver = pick<SolverChoice>(
      L, "run.solver", {{"auto", SolverChoice::automatic}, {"closed", SolverChoice::closed}, {"grid", SolverChoice::grid}});
  c.trajectory_stride = L.number("run.trajectory_stride");
  if (!(c.trajectory_stride > 0.0)) throw ConfigError("run.trajectory_stride must be positive");
  c.threads = static_cast<unsigned>(L.unsigned_int("run.threads"));

  if (c.thermal()) {
    if (c.engine != Engine::fock_master)
      throw ConfigError("finite temperature or cavity leakage needs run.engine = fock-master");
    if (c.bath != BathKind::ou) throw ConfigError("finite temperature needs an OU spectral density (bath.kind = ou)");
  }
  if (c.engine == Engine::trajectories && c.thermal()) throw ConfigError("trajectories support zero temperature only");

  c.gammas = L.list("scenario.gammas");
  // An explicit gamma replaces the scenario's gamma list unless the list itself was given.
  if (L.explicit_value("bath.gamma") && !L.explicit_value("scenario.gammas")) c.gammas = {c.ou.gamma};
  for (double g : c.gammas)
    if (!(g > 0.0)) throw ConfigError("scenario.gammas: every gamma must be positive");
  c.probe_time = L.number("scenario.probe_time");
  c.onset_threshold = L.number("scenario.onset_threshold");

  if (L.given("sweep.parameter")) {
    SweepSpec s;
    s.parameter = L.text("sweep.parameter");
    static const char* allowed[] = {"gamma", "omega_env", "delta", "coupling", "decay", "temperature"};
    if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* a) { return s.parameter == a; }) ==
        std::end(allowed))
      throw ConfigError("sweep.parameter: unknown parameter '" + s.parameter + "'");
    s.values = sweep_values(L);
    if (s.values.empty()) throw ConfigError("sweep: empty value list");
    if (raw && (s.parameter == "delta" || s.parameter == "coupling"))
      throw ConfigError("sweep over delta/coupling needs the linearized system parameters");
    c.sweep = std::move(s);
  } else if (L.given("sweep.values") || L.given("sweep.start")) {
    throw ConfigError("sweep: values given without sweep.parameter");
  }
  if (scenario == Scenario::fig4 && (!c.sweep || c.sweep->parameter != "omega_env"))
    throw ConfigError("fig4 scans omega_env; sweep.parameter must be omega_env");
  if (scenario == Scenario::fig5 && (!c.sweep || c.sweep->parameter != "delta"))
    throw ConfigError("fig5 scans delta; sweep.parameter must be delta");
  if ((scenario == Scenario::fig2 || scenario == Scenario::fig3 || scenario == Scenario::fig5) && c.gammas.empty())
    throw ConfigError("scenario.gammas must not be empty for " + to_string(scenario));

  c.out_dir = L.text("output.dir");
  if (c.out_dir.empty()) throw ConfigError("output.dir must not be empty");
  c.csv = c.svg = false;
  {
    std::stringstream ss(L.text("output.format"));
    std::string f;
    while (std::getline(ss, f, ',')) {
      f = trim(f);
      if (f == "csv") c.csv = true;
      else if (f == "svg") c.svg = true;
      else if (f == "bin") c.snapshots = true;
      else throw ConfigError("output.format: unknown format '" + f + "'");
    }
  }
  if (!c.csv && !c.svg && !c.snapshots) throw ConfigError("output.format selects nothing");
  if (c.snapshots && c.engine == Engine::moments && !c.thermal())
    throw ConfigError("output.format bin needs a density-matrix engine (fock-master or trajectories)");

  c.entries = L.all();
  c.assumptions = std::move(assumptions);
  return c;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::fig2: return "fig2";
    case Scenario::fig3: return "fig3";
    case Scenario::fig4: return "fig4";
    case Scenario::fig5: return "fig5";
    case Scenario::custom: return "custom";
  }
  return "?";
}

std::string to_string(Engine e) {
  switch (e) {
    case Engine::moments: return "moments";
    case Engine::fock_master: return "fock-master";
    case Engine::trajectories: return "trajectories";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  for (Scenario x : {Scenario::fig2, Scenario::fig3, Scenario::fig4, Scenario::fig5, Scenario::custom})
    if (to_string(x) == s) return x;
  throw ConfigError("unknown scenario '" + s + "' (expected fig2, fig3, fig4, fig5 or custom)");
}

RunConfig parse_config(const std::string& text, std::optional<Scenario> scenario,
                       const std::vector<ConfigOverride>& flags) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::vector<std::pair<std::string, std::string>> file_values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) file_values.emplace_back(section + "." + key, value.data());
  }

  // The scenario can come from the file; a flag wins.
  Scenario sc = Scenario::custom;
  for (const auto& [k, v] : file_values)
    if (k == "run.scenario") sc = parse_scenario(trim(v));
  for (const auto& f : flags)
    if (f.key == "run.scenario") sc = parse_scenario(trim(f.value));
  if (scenario) sc = *scenario;

  Layers L;
  std::vector<std::string> assumptions;
  apply_scenario_presets(L, sc, assumptions);
  for (const auto& [k, v] : file_values) L.set(k, v, ValueSource::file);
  for (const auto& f : flags) L.set(f.key, f.value, ValueSource::flag);
  L.set("run.scenario", to_string(sc), scenario ? ValueSource::flag : L.entry("run.scenario").source);
  return build(L, sc, std::move(assumptions));
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Scenario> scenario,
                      const std::vector<ConfigOverride>& flags) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), scenario, flags);
}

std::string resolved_config_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(cfg.scenario);
  j["linearized"] = {{"omega_m", cfg.sys.omega_m}, {"delta", cfg.sys.Delta}, {"coupling", cfg.sys.G}};
  auto& entries = j["entries"];
  entries = nlohmann::ordered_json::object();
  for (const auto& [key, e] : cfg.entries) {
    nlohmann::ordered_json v = e.value;
    double x = 0.0;
    const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), x);
    if (!e.value.empty() && res.ec == std::errc() && res.ptr == e.value.data() + e.value.size()) v = x;
    entries[key] = {{"value", v}, {"source", source_name(e.source)}};
  }
  j["assumptions"] = cfg.assumptions;
  return j.dump(2) + "\n";
}

RunConfig with_parameter(const RunConfig& cfg, const std::string& parameter, double value) {
  RunConfig c = cfg;
  if (parameter == "gamma") c.ou.gamma = value;
  else if (parameter == "omega_env") c.ou.Omega = value;
  else if (parameter == "delta") c.sys.Delta = value;
  else if (parameter == "coupling") c.sys.G = value;
  else if (parameter == "decay") c.ou.Gamma = value;
  else if (parameter == "temperature") c.temperature = value;
  else throw ConfigError("unknown sweep parameter '" + parameter + "'");
  if (c.bath == BathKind::ou && !(c.ou.gamma > 0.0)) throw ConfigError("sweep produced gamma <= 0");
  if (c.temperature < 0.0) throw ConfigError("sweep produced a negative temperature");
  return c;
}

KernelSpec make_kernel(const RunConfig& cfg) {
  switch (cfg.bath) {
    case BathKind::ou: return cfg.ou;
    case BathKind::markov: return MarkovKernel{cfg.ou.Gamma};
    case BathKind::tabulated:
      try {
        return read_tabulated_kernel(cfg.kernel_file);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bath.kernel_file: ") + e.what());
      }
  }
  return cfg.ou;
}

}  // namespace nmopto
