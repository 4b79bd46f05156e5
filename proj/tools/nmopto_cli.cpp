#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "nmopto/config.hpp"
#include "nmopto/errors.hpp"
#include "nmopto/scenario.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Markovian optomechanical entanglement simulator"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run a scenario and write its outputs");

  std::string scenario;
  std::string config_path;
  std::string out_dir, engine, format;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt, tfinal, gamma, omega_env, delta, coupling, decay;

  run->add_option("--scenario", scenario, "fig2|fig3|fig4|fig5|custom")->required();
  run->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Master RNG seed");
  run->add_option("--engine", engine, "moments|fock-master|trajectories");
  run->add_option("--dt", dt, "Time step");
  run->add_option("--tfinal", tfinal, "Final time");
  run->add_option("--gamma", gamma, "Bath memory rate");
  run->add_option("--omega-env", omega_env, "Bath central frequency");
  run->add_option("--delta", delta, "Effective detuning");
  run->add_option("--coupling", coupling, "Effective optomechanical coupling");
  run->add_option("--decay", decay, "Bath decay rate");
  run->add_option("--format", format, "Comma-separated output formats (csv,svg,bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    std::vector<nmopto::ConfigOverride> flags;
    auto add = [&](const char* key, const std::string& v) { flags.push_back({key, v}); };
    auto add_num = [&](const char* key, const std::optional<double>& v) {
      if (v) add(key, nmopto::short_label(*v));
    };
    if (!out_dir.empty()) add("output.dir", out_dir);
    if (seed) add("run.seed", std::to_string(*seed));
    if (!engine.empty()) add("run.engine", engine);
    if (!format.empty()) add("output.format", format);
    add_num("grid.dt", dt);
    add_num("grid.t_final", tfinal);
    add_num("bath.gamma", gamma);
    add_num("bath.omega_env", omega_env);
    add_num("system.delta", delta);
    add_num("system.coupling", coupling);
    add_num("bath.decay", decay);

    const auto sc = nmopto::parse_scenario(scenario);
    const nmopto::RunConfig cfg =
        config_path.empty() ? nmopto::parse_config("", sc, flags) : nmopto::load_config(config_path, sc, flags);
    const auto res = nmopto::run_scenario(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << res.files.size() << " files to " << cfg.out_dir.string() << "\n";
    return 0;
  } catch (const nmopto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nmopto::DomainError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kConfigError;
  } catch (const nmopto::TruncationError& e) {
    std::cerr << "truncation failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const nmopto::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericError;
  }
}
