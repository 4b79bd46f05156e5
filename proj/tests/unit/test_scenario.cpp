#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nmopto/config.hpp"
#include "nmopto/errors.hpp"
#include "nmopto/output.hpp"
#include "nmopto/scenario.hpp"

using namespace nmopto;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nmopto_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("CSV writer prints round-trip doubles and enforces the column count") {
  std::ostringstream out;
  CsvWriter w(out, {"x", "y"});
  const double row[] = {0.1, 1.0 / 3.0};
  w.row(row);
  CHECK(out.str() == "x,y\n0.10000000000000001,0.33333333333333331\n");
  const double bad[] = {1.0};
  CHECK_THROWS(w.row(bad));
  CHECK(short_label(0.6) == "0.6");
}

TEST_CASE("gamma sweep writes one directory per value and an index") {
  const fs::path dir = scratch("sweep");
  const auto cfg = parse_config("[grid]\nt_final = 2\n[sweep]\nparameter = gamma\nvalues = 0.5, 1, 2\n[output]\nformat = csv\n",
                                Scenario::custom, {{"output.dir", dir.string()}});
  const auto res = run_scenario(cfg);
  for (const char* d : {"run_000", "run_001", "run_002"}) CHECK(fs::exists(dir / d / "En.csv"));
  const auto index = nlohmann::json::parse(slurp(dir / "index.json"));
  REQUIRE(index.size() == 3);
  CHECK(index[1]["value"] == 1.0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "resolved_config.json"));
  fs::remove_all(dir);
}

TEST_CASE("trajectory runs are byte-identical across repeats and thread counts") {
  auto run = [](const std::string& name, const std::string& threads) {
    const fs::path dir = scratch(name);
    const auto cfg = parse_config(
        "[grid]\nt_final = 1\n[run]\nengine = trajectories\npaths = 24\nfock_na = 4\nfock_nb = 4\n"
        "trajectory_stride = 0.25\n[output]\nformat = csv\n",
        Scenario::custom, {{"output.dir", dir.string()}, {"run.threads", threads}});
    run_scenario(cfg);
    std::string out = slurp(dir / "En.csv");
    fs::remove_all(dir);
    return out;
  };
  const std::string a = run("det_a", "1"), b = run("det_b", "1"), c = run("det_c", "3");
  CHECK(!a.empty());
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("short-memory bath approaches the Markov entanglement curve") {
  auto trace = [](const std::string& bath) {
    return compute_entanglement(parse_config("[grid]\nt_final = 30\n[bath]\ndecay = 2\n" + bath));
  };
  const auto markov = trace("kind = markov\n");
  const auto ou = trace("gamma = 50\n");
  REQUIRE(markov.En.size() == ou.En.size());
  double worst = 0;
  for (std::size_t i = 0; i < ou.En.size(); ++i) worst = std::max(worst, std::abs(ou.En[i] - markov.En[i]));
  CHECK(worst < 0.02);
}

TEST_CASE("onset time interpolates the threshold crossing") {
  EnTrace t;
  t.t = {0, 1, 2};
  t.En = {0, 0.05, 0.15};
  CHECK(onset_time(t, 0.1) == doctest::Approx(1.5));
  CHECK(std::isnan(onset_time(t, 1.0)));
  CHECK(value_at(t, 1.2) == 0.05);
  CHECK(max_value(t) == 0.15);
}

TEST_CASE("thermal engine runs through the scenario layer") {
  const auto cfg = parse_config(
      "[grid]\nt_final = 2\n[bath]\ntemperature = 0.5\nomega_env = 1\nthermal_kernels = narrowband\n"
      "[run]\nengine = fock-master\nfock_na = 5\nfock_nb = 5\n");
  const auto tr = compute_entanglement(cfg);
  CHECK(tr.En.size() == 201);
  CHECK(tr.En.back() >= 0.0);
}

TEST_CASE("fock-master runs write binary density-matrix snapshots at the checkpoint stride") {
  const fs::path dir = scratch("snap");
  const auto cfg = parse_config("[grid]\nt_final = 1\n[run]\nengine = fock-master\nfock_na = 4\nfock_nb = 5\n"
                                "trajectory_stride = 0.5\n[output]\nformat = csv,bin\n",
                                Scenario::custom, {{"output.dir", dir.string()}});
  run_scenario(cfg);
  for (const char* name : {"rho_t0.bin", "rho_t0.5.bin", "rho_t1.bin"}) {
    REQUIRE(fs::exists(dir / name));
    std::ifstream in(dir / name, std::ios::binary);
    const Snapshot s = read_snapshot(in);
    CHECK(s.dims.na == 4);
    CHECK(s.dims.nb == 5);
    CHECK(std::abs(s.rho.trace() - 1.0) < 1e-10);
  }
  CHECK(fs::file_size(dir / "rho_t1.bin") == 4 + 4 + 8 + 20 * 20 * 16);
  fs::remove_all(dir);
  CHECK_THROWS_AS(parse_config("[output]\nformat = bin\n"), ConfigError);
}
