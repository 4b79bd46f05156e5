#include "nmopto/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "nmopto/errors.hpp"
#include "nmopto/fock.hpp"
#include "nmopto/gaussian_ent.hpp"
#include "nmopto/moments.hpp"
#include "nmopto/output.hpp"
#include "nmopto/thermal.hpp"

namespace nmopto {

namespace fs = std::filesystem;

std::string short_label(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

OCoefficientSeries compute_coefficients(const RunConfig& cfg, const TimeGrid& grid) {
  const KernelSpec k = make_kernel(cfg);
  switch (cfg.solver) {
    case SolverChoice::automatic:
      return solve_coefficients(k, cfg.sys, grid, cfg.include_f5);
    case SolverChoice::closed:
      if (const auto* ou = std::get_if<OUKernel>(&k)) return solve_ou_closed(*ou, cfg.sys, grid, cfg.include_f5);
      if (const auto* m = std::get_if<MarkovKernel>(&k)) return markov_series(m->Gamma, grid);
      throw ConfigError("run.solver = closed needs an OU or Markov bath");
    case SolverChoice::grid: {
      GridSolverOptions opt;
      opt.include_f5 = cfg.include_f5;
      return solve_two_time_grid(k, cfg.sys, grid, opt).series;
    }
  }
  throw ConfigError("unknown solver");
}

namespace {

double en_from_rho(const Eigen::MatrixXcd& rho, const FockOperators& ops) {
  const double tr = rho.trace().real();
  return log_negativity(covariance_from_moments(moments_from_rho(rho / tr, ops))).En;
}

std::size_t checkpoint_stride(const RunConfig& cfg) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.trajectory_stride / cfg.dt)));
}

// Density-matrix observer shared by the master-equation engines.
RhoObserver trace_observer(const RunConfig& cfg, const TimeGrid& grid, const FockOperators& ops, EnTrace& tr) {
  const std::size_t stride = checkpoint_stride(cfg);
  tr.dims = ops.dims;
  return [&cfg, &grid, &ops, &tr, stride](std::size_t k, const Eigen::MatrixXcd& rho) {
    tr.t.push_back(grid.t(k));
    tr.En.push_back(en_from_rho(rho, ops));
    if (cfg.snapshots && (k % stride == 0 || k == grid.steps)) tr.snapshots.emplace_back(grid.t(k), rho);
  };
}

EnTrace thermal_trace(const RunConfig& cfg, const TimeGrid& grid) {
  ThermalBathSpec bath;
  bath.temperature = cfg.temperature;
  bath.base = cfg.ou;
  bath.omega_ir = cfg.omega_ir;
  bath.coupling = cfg.coupling;
  bath.method = cfg.thermal_method;
  const auto kernels = effective_kernels(bath, grid.dt / 2, 2 * grid.steps + 1);
  const auto X = solve_thermal_ocoeff(kernels, cfg.coupling, cfg.sys, grid, cfg.solver == SolverChoice::grid);
  const auto ops = build_operators(cfg.dims);
  EnTrace tr;
  integrate_thermal_master(X, cfg.coupling, ops, cfg.sys, fock_state(cfg.dims, 0, 0), grid,
                           trace_observer(cfg, grid, ops, tr));
  return tr;
}

}  // namespace

EnTrace compute_entanglement(const RunConfig& cfg) {
  const TimeGrid grid = TimeGrid::covering(cfg.dt, cfg.t_final);
  if (cfg.thermal()) return thermal_trace(cfg, grid);

  const OCoefficientSeries F = compute_coefficients(cfg, grid);
  EnTrace tr;
  switch (cfg.engine) {
    case Engine::moments: {
      const auto traj = integrate_moments(F, cfg.sys, MomentState::vacuum(), grid);
      tr.min_symplectic = traj.min_symplectic;
      tr.physicality_warnings = traj.physicality_warnings;
      for (std::size_t k = 0; k < traj.states.size(); ++k) {
        tr.t.push_back(grid.t(k));
        tr.En.push_back(log_negativity(covariance_from_moments(traj.states[k])).En);
      }
      break;
    }
    case Engine::fock_master: {
      const auto ops = build_operators(cfg.dims);
      integrate_master(F, ops, cfg.sys, fock_state(cfg.dims, 0, 0), grid, trace_observer(cfg, grid, ops, tr));
      break;
    }
    case Engine::trajectories: {
      const auto ops = build_operators(cfg.dims);
      EnsembleOptions opt;
      opt.paths = cfg.paths;
      opt.master_seed = cfg.seed;
      opt.threads = cfg.threads;
      const auto stride = checkpoint_stride(cfg);
      for (std::size_t k = 0; k <= grid.steps; k += stride) opt.checkpoints.push_back(k);
      if (opt.checkpoints.back() != grid.steps) opt.checkpoints.push_back(grid.steps);
      tr.dims = cfg.dims;
      const auto res = run_trajectory_ensemble(F, ops, cfg.sys, make_kernel(cfg), fock_vector(cfg.dims, 0, 0), grid, opt);
      for (std::size_t c = 0; c < res.checkpoints.size(); ++c) {
        tr.t.push_back(grid.t(res.checkpoints[c]));
        tr.En.push_back(en_from_rho(res.averages[c].rho, ops));
        tr.max_trace_stderr = std::max(tr.max_trace_stderr, res.averages[c].trace_stderr);
        if (cfg.snapshots) tr.snapshots.emplace_back(tr.t.back(), res.averages[c].rho / res.averages[c].rho.trace());
      }
      break;
    }
  }
  return tr;
}

double onset_time(const EnTrace& tr, double threshold) {
  for (std::size_t i = 0; i < tr.En.size(); ++i) {
    if (tr.En[i] < threshold) continue;
    if (i == 0) return tr.t[0];
    const double f = (threshold - tr.En[i - 1]) / (tr.En[i] - tr.En[i - 1]);
    return tr.t[i - 1] + f * (tr.t[i] - tr.t[i - 1]);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double value_at(const EnTrace& tr, double t) {
  if (tr.t.empty()) throw DomainError("empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < tr.t.size(); ++i)
    if (std::abs(tr.t[i] - t) < std::abs(tr.t[best] - t)) best = i;
  return tr.En[best];
}

double max_value(const EnTrace& tr) {
  if (tr.En.empty()) throw DomainError("empty trace");
  return *std::max_element(tr.En.begin(), tr.En.end());
}

namespace {

// Runs fn(0..n-1) on a small pool; results land in index order and the first failure is
// rethrown after every worker stopped.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::mutex m;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  t = static_cast<unsigned>(std::min<std::size_t>(t, n));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// One scan point; numeric failures (e.g. a singular time-local generator) become a NaN
// column plus a manifest warning instead of aborting the whole scan.
struct PointResult {
  EnTrace trace;
  std::string error;
  bool ok() const { return error.empty(); }
};

PointResult try_point(const RunConfig& cfg) {
  try {
    return {compute_entanglement(cfg), {}};
  } catch (const NumericError& e) {
    return {{}, e.what()};
  }
}

std::vector<PointResult> run_points(const std::vector<RunConfig>& points, unsigned threads) {
  return parallel_map<PointResult>(points.size(), threads, [&](std::size_t i) { return try_point(points[i]); });
}

// Time axis shared by the successful points; failed points get NaN columns.
std::vector<double> scan_axis(const std::vector<PointResult>& pts) {
  const std::vector<double>* axis = nullptr;
  for (const auto& p : pts) {
    if (!p.ok()) continue;
    if (!axis) axis = &p.trace.t;
    else if (p.trace.t != *axis) throw NumericError("traces do not share a time axis");
  }
  if (!axis) throw NumericError("every scan point failed: " + pts.front().error);
  return *axis;
}

std::vector<double> column(const PointResult& p, std::size_t n) {
  return p.ok() ? p.trace.En : std::vector<double>(n, std::numeric_limits<double>::quiet_NaN());
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Writer {
 public:
  Writer(const RunConfig& cfg, ScenarioResult& res) : cfg_(cfg), res_(res) { fs::create_directories(cfg.out_dir); }

  fs::path path(const std::string& name) const { return cfg_.out_dir / name; }

  // Wide table: first column `xname`, one column per trace.
  void table(const std::string& name, const std::string& xname, const std::vector<double>& x,
             const std::vector<std::string>& names, const std::vector<std::vector<double>>& cols) {
    if (!cfg_.csv) return;
    std::ofstream out(path(name));
    if (!out) throw NumericError("cannot write " + path(name).string());
    std::vector<std::string> header{xname};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter csv(out, header);
    std::vector<double> row(header.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      row[0] = x[i];
      for (std::size_t c = 0; c < cols.size(); ++c) row[c + 1] = cols[c][i];
      csv.row(row);
    }
    res_.files.push_back(path(name));
  }

  void lines(const std::string& name, const std::string& title, const std::string& xl, const std::string& yl,
             const std::vector<Series2D>& s) {
    if (!cfg_.svg) return;
    write_line_plot_svg(path(name), title, xl, yl, s);
    res_.files.push_back(path(name));
  }

  void heatmap(const std::string& name, const std::string& title, const std::vector<double>& xs,
               const std::vector<double>& ys, const std::vector<std::vector<double>>& z) {
    if (!cfg_.svg) return;
    write_heatmap_svg(path(name), title, xs, ys, z);
    res_.files.push_back(path(name));
  }

 private:
  const RunConfig& cfg_;
  ScenarioResult& res_;
};

void note_physicality(const EnTrace& tr, const std::string& label, ScenarioResult& res) {
  if (tr.physicality_warnings > 0)
    res.warnings.push_back(label + ": covariance matrix left the physical region at " +
                           std::to_string(tr.physicality_warnings) + " grid points (min symplectic eigenvalue " +
                           short_label(tr.min_symplectic) + ")");
}

// Samples every trace on a common time axis (traces from one engine share their samples).
std::vector<double> common_axis(const std::vector<EnTrace>& traces) {
  for (const auto& t : traces)
    if (t.t != traces.front().t) throw NumericError("traces do not share a time axis");
  return traces.front().t;
}

void run_fig2(const RunConfig& cfg, Writer& w, ScenarioResult& res) {
  const TimeGrid grid = TimeGrid::covering(cfg.dt, cfg.t_final);
  for (double g : cfg.gammas) {
    const RunConfig c = with_parameter(cfg, "gamma", g);
    const auto F = compute_coefficients(c, grid);
    const std::string tag = "gamma" + short_label(g);
    if (cfg.csv) {
      std::ofstream out(w.path("fig2_F_" + tag + ".csv"));
      write_series_csv(out, F);
      res.files.push_back(w.path("fig2_F_" + tag + ".csv"));
    }
    const std::size_t k = grid.index_of(cfg.probe_time);
    const double f1 = std::abs(F.at(coef::F1, k));
    res.metrics["F5_over_F1_at_probe_" + tag] = f1 > 0 ? std::abs(F.at(coef::F5, k)) / f1 : 0.0;
    std::vector<Series2D> s(5);
    for (int j = 0; j < 5; ++j) {
      s[j].label = "|F" + std::to_string(j + 1) + "|";
      for (std::size_t i = 0; i < grid.points(); ++i) {
        s[j].x.push_back(grid.t(i));
        s[j].y.push_back(std::abs(F.at(j, i)));
      }
    }
    w.lines("fig2_F_" + tag + ".svg", "O coefficients, gamma = " + short_label(g), "t", "|F_j|", s);
  }
}

void run_fig3(const RunConfig& cfg, Writer& w, ScenarioResult& res) {
  std::vector<RunConfig> points;
  std::vector<std::string> names;
  for (double g : cfg.gammas) {
    points.push_back(with_parameter(cfg, "gamma", g));
    points.back().bath = BathKind::ou;
    names.push_back("En_gamma" + short_label(g));
  }
  RunConfig markov = cfg;
  markov.bath = BathKind::markov;
  points.push_back(markov);
  names.push_back("En_markov");

  const auto traces = parallel_map<EnTrace>(points.size(), cfg.threads,
                                            [&](std::size_t i) { return compute_entanglement(points[i]); });
  std::vector<std::vector<double>> cols;
  std::vector<Series2D> series;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string tag = names[i].substr(3);
    cols.push_back(traces[i].En);
    series.push_back({tag, traces[i].t, traces[i].En});
    res.metrics["onset_" + tag] = onset_time(traces[i], cfg.onset_threshold);
    res.metrics["En_at_probe_" + tag] = value_at(traces[i], cfg.probe_time);
    note_physicality(traces[i], tag, res);
  }
  w.table("fig3_En.csv", "t", common_axis(traces), names, cols);
  w.lines("fig3_En.svg", "Entanglement for several memory times", "t", "En", series);
}

void run_fig4(const RunConfig& cfg, Writer& w, ScenarioResult& res) {
  const auto& omegas = cfg.sweep->values;
  std::vector<RunConfig> points;
  for (double o : omegas) points.push_back(with_parameter(cfg, "omega_env", o));
  const auto pts = run_points(points, cfg.threads);
  const auto t = scan_axis(pts);
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<double> slice;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    names.push_back("En_Omega" + short_label(omegas[i]));
    cols.push_back(column(pts[i], t.size()));
    if (pts[i].ok()) {
      slice.push_back(value_at(pts[i].trace, cfg.probe_time));
      note_physicality(pts[i].trace, names.back(), res);
    } else {
      slice.push_back(kNaN);
      ++failed;
      res.warnings.push_back(names.back() + ": " + pts[i].error);
    }
  }
  w.table("fig4_En_grid.csv", "t", t, names, cols);
  w.table("fig4_slice.csv", "omega_env", omegas, {"En_at_probe"}, {slice});
  bool monotone = failed == 0;
  for (std::size_t i = 1; i < slice.size(); ++i) monotone &= !(slice[i] < slice[i - 1]);
  res.metrics["slice_non_decreasing"] = monotone ? 1.0 : 0.0;
  res.metrics["failed_points"] = static_cast<double>(failed);
  double lo = kNaN, hi = kNaN;
  for (double v : slice)
    if (std::isfinite(v)) {
      lo = std::isfinite(lo) ? std::min(lo, v) : v;
      hi = std::isfinite(hi) ? std::max(hi, v) : v;
    }
  res.metrics["slice_min"] = lo;
  res.metrics["slice_max"] = hi;

  std::vector<std::vector<double>> z(t.size(), std::vector<double>(omegas.size()));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < omegas.size(); ++j) z[i][j] = cols[j][i];
  w.heatmap("fig4_En_grid.svg", "En over (Omega, t)", omegas, t, z);
  w.lines("fig4_slice.svg", "En at the probe time", "Omega", "En", {{"En", omegas, slice}});
}

void run_fig5(const RunConfig& cfg, Writer& w, ScenarioResult& res) {
  const auto& deltas = cfg.sweep->values;
  std::vector<std::string> max_names;
  std::vector<std::vector<double>> max_cols;
  std::vector<Series2D> max_series;
  for (double g : cfg.gammas) {
    const RunConfig cg = with_parameter(cfg, "gamma", g);
    std::vector<RunConfig> points;
    for (double d : deltas) points.push_back(with_parameter(cg, "delta", d));
    const auto pts = run_points(points, cfg.threads);
    const auto t = scan_axis(pts);
    const std::string tag = "gamma" + short_label(g);
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    std::vector<double> peak;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      names.push_back("En_Delta" + short_label(deltas[i]));
      cols.push_back(column(pts[i], t.size()));
      if (pts[i].ok()) {
        peak.push_back(max_value(pts[i].trace));
        note_physicality(pts[i].trace, tag + " " + names.back(), res);
        if (!(peak[best] >= peak.back())) best = i;
      } else {
        peak.push_back(kNaN);
        res.warnings.push_back(tag + " " + names.back() + ": " + pts[i].error);
      }
    }
    w.table("fig5_En_grid_" + tag + ".csv", "t", t, names, cols);
    res.metrics["argmax_delta_" + tag] = deltas[best];
    res.metrics["max_En_" + tag] = peak[best];
    max_names.push_back("maxEn_" + tag);
    max_cols.push_back(peak);
    max_series.push_back({tag, deltas, peak});

    std::vector<std::vector<double>> z(t.size(), std::vector<double>(deltas.size()));
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = 0; j < deltas.size(); ++j) z[i][j] = cols[j][i];
    w.heatmap("fig5_En_grid_" + tag + ".svg", "En over (Delta, t), " + tag, deltas, t, z);
  }
  w.table("fig5_max.csv", "delta", deltas, max_names, max_cols);
  w.lines("fig5_max.svg", "Maximum entanglement over time", "Delta", "max En", max_series);
}

void write_point(const RunConfig& cfg, const EnTrace& tr, Writer& w, ScenarioResult& res, const std::string& prefix) {
  w.table(prefix + "En.csv", "t", tr.t, {"En"}, {tr.En});
  w.lines(prefix + "En.svg", "Logarithmic negativity", "t", "En", {{"En", tr.t, tr.En}});
  if (!cfg.thermal() && cfg.csv) {
    const TimeGrid grid = TimeGrid::covering(cfg.dt, cfg.t_final);
    const auto F = compute_coefficients(cfg, grid);
    std::ofstream out(w.path(prefix + "F.csv"));
    write_series_csv(out, F);
    res.files.push_back(w.path(prefix + "F.csv"));
    if (cfg.engine == Engine::moments) {
      std::ofstream mo(w.path(prefix + "moments.csv"));
      write_moments_csv(mo, integrate_moments(F, cfg.sys, MomentState::vacuum(), grid));
      res.files.push_back(w.path(prefix + "moments.csv"));
    }
  }
  for (const auto& [t, rho] : tr.snapshots) {
    const fs::path file = w.path(prefix + "rho_t" + short_label(t) + ".bin");
    write_snapshot(file, tr.dims, t, rho);
    res.files.push_back(file);
  }
  note_physicality(tr, prefix.empty() ? "run" : prefix, res);
}

void run_custom(const RunConfig& cfg, Writer& w, ScenarioResult& res) {
  if (!cfg.sweep) {
    const auto tr = compute_entanglement(cfg);
    write_point(cfg, tr, w, res, "");
    res.metrics["En_final"] = tr.En.back();
    res.metrics["En_max"] = max_value(tr);
    if (cfg.engine == Engine::trajectories) res.metrics["max_trace_stderr"] = tr.max_trace_stderr;
    return;
  }
  const auto& values = cfg.sweep->values;
  std::vector<RunConfig> points;
  for (double v : values) points.push_back(with_parameter(cfg, cfg.sweep->parameter, v));
  const auto pts = run_points(points, cfg.threads);
  scan_axis(pts);
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "run_%03zu", i);
    nlohmann::ordered_json entry = {{"directory", dir}, {"parameter", cfg.sweep->parameter}, {"value", values[i]}};
    if (pts[i].ok()) {
      fs::create_directories(cfg.out_dir / dir);
      write_point(points[i], pts[i].trace, w, res, std::string(dir) + "/");
      entry["En_final"] = pts[i].trace.En.back();
      entry["En_max"] = max_value(pts[i].trace);
    } else {
      entry["error"] = pts[i].error;
      res.warnings.push_back(std::string(dir) + ": " + pts[i].error);
    }
    index.push_back(entry);
  }
  std::ofstream out(w.path("index.json"));
  out << index.dump(2) << "\n";
  res.files.push_back(w.path("index.json"));
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& cfg) {
  ScenarioResult res;
  Writer w(cfg, res);
  {
    std::ofstream out(w.path("resolved_config.json"));
    out << resolved_config_json(cfg);
  }
  switch (cfg.scenario) {
    case Scenario::fig2: run_fig2(cfg, w, res); break;
    case Scenario::fig3: run_fig3(cfg, w, res); break;
    case Scenario::fig4: run_fig4(cfg, w, res); break;
    case Scenario::fig5: run_fig5(cfg, w, res); break;
    case Scenario::custom: run_custom(cfg, w, res); break;
  }

  nlohmann::ordered_json m;
  m["scenario"] = to_string(cfg.scenario);
  m["engine"] = to_string(cfg.engine);
  m["seed"] = cfg.seed;
  m["grid"] = {{"dt", cfg.dt}, {"t_final", cfg.t_final}};
  m["assumptions"] = cfg.assumptions;
  m["warnings"] = res.warnings;
  auto& metrics = m["metrics"];
  metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : res.metrics) metrics[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr;
  auto& files = m["files"];
  files = nlohmann::ordered_json::array();
  files.push_back("resolved_config.json");
  for (const auto& f : res.files) files.push_back(fs::relative(f, cfg.out_dir).generic_string());
  std::ofstream out(w.path("manifest.json"));
  out << m.dump(2) << "\n";
  res.files.insert(res.files.begin(), w.path("resolved_config.json"));
  res.files.push_back(w.path("manifest.json"));
  return res;
}

}  // namespace nmopto
