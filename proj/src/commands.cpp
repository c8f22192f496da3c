#include "etapair/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

namespace etapair {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::unique_ptr<Model> load_model(const RunConfig& c, CommandOutput& out) {
  auto m = Model::build(c.system, c.cache_dir);
  if (m->norm_cache()) out.caches.push_back(*m->norm_cache());
  return m;
}

fs::path output_file(const RunConfig& c, CommandOutput& out, const std::string& name) {
  fs::create_directories(c.output.dir);
  fs::path p = c.output.dir / name;
  out.files.push_back(p);
  return p;
}

SpectralDecomposition load_spectrum(const RunConfig& c, const Model& m, CommandOutput& out) {
  SpectralDecomposition s = m.spectrum(c.cache_dir);
  out.caches.push_back(c.cache_dir / c.system.cache_key("spectrum").file_name());
  return s;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

void write_matrix(const ScanGrid& g, const fs::path& path, const std::function<double(const GridCell&)>& value) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  char buf[40];
  f << "phi0\\omega_p";
  for (double w : g.spec.omegas) {
    std::snprintf(buf, sizeof buf, ",%.12g", w);
    f << buf;
  }
  f << '\n';
  for (std::size_t j = 0; j < g.spec.phi0s.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.12g", g.spec.phi0s[j]);
    f << buf;
    for (std::size_t i = 0; i < g.spec.omegas.size(); ++i) {
      const GridCell& cell = g.at(i, j);
      const double v = cell.ok() ? value(cell) : std::nan("");
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      f << buf;
    }
    f << '\n';
  }
}

json levels_summary(const Decomposition& d, int sites, std::size_t top) {
  std::vector<LevelWeight> lv = d.levels;
  std::stable_sort(lv.begin(), lv.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  json arr = json::array();
  for (std::size_t i = 0; i < std::min(top, lv.size()); ++i) {
    arr.push_back({{"energy", lv[i].energy},
                   {"eta2_per_L", lv[i].eta_sq / sites},
                   {"weight", lv[i].weight},
                   {"states", lv[i].states}});
  }
  return arr;
}

// Replays `series` open loop from the ground state up to t_end.
Trajectory replay(const Model& m, const RunConfig& c, const FieldSeries& series, double t_end) {
  ReplaySource src(series);
  const PropagatorConfig pc = c.engine.propagator(c.drive.pulse.omega);
  Propagator prop(m.family(), pc);
  return evolve(m.ground().state, src, t_end, TimeGrid{0.0, pc.dt}, prop, m.observables(), m.sites());
}

FieldSeries synthetic_signal(const RunConfig& c) {
  std::mt19937_64 rng(c.seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const double dt = default_time_step(c.drive.pulse.omega);
  const double t_end = c.end_time();
  FieldSeries s;
  for (std::size_t k = 0; static_cast<double>(k) * dt <= t_end; ++k) {
    const double t = static_cast<double>(k) * dt;
    s.t.push_back(t);
    if (*c.stft.synthetic == "sinusoid") {
      s.phi.push_back(0.2 * std::sin(c.drive.pulse.omega * t + phase));
    } else {
      // Instantaneous frequency rising linearly from freq_min to freq_max.
      const double w0 = c.stft.freq_min;
      const double rate = (c.stft.freq_max - c.stft.freq_min) / t_end;
      s.phi.push_back(0.2 * std::sin(w0 * t + 0.5 * rate * t * t + phase));
    }
  }
  return s;
}

void stft_outputs(const RunConfig& c, const FieldSeries& series, std::optional<std::pair<double, double>> support,
                  std::optional<double> t_act, CommandOutput& out) {
  const Spectrogram sg = stft(uniform_part(series), c.stft.resolve(c.drive.pulse.period()), support);
  write_spectrogram_csv(sg, output_file(c, out, "spectrogram.csv").string());
  std::ofstream f(output_file(c, out, "ridge.csv"));
  f << "t,omega,border\n";
  const auto r = sg.ridge();
  char buf[96];
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", sg.times[i], r[i], sg.border[i] ? 1 : 0);
    f << buf;
  }
  json s = {{"window", sg.window}};
  if (t_act) {
    if (auto before = sg.ridge_median(series.t.front(), *t_act)) s["ridge_before_activation"] = *before;
    if (auto after = sg.ridge_median(*t_act, series.t.back())) s["ridge_after_activation"] = *after;
  } else if (auto all = sg.ridge_median(series.t.front(), series.t.back())) {
    s["ridge_median"] = *all;
  }
  out.summary["stft"] = s;
}

}  // namespace

CommandOutput cmd_spectrum(const RunConfig& c) {
  CommandOutput out;
  auto m = load_model(c, out);
  const SpectralDecomposition s = load_spectrum(c, *m, out);
  write_spectrum_csv(s, output_file(c, out, "spectrum.csv").string());
  const double top = c.system.sites * c.system.interaction / 2.0;
  std::size_t at_top = 0;
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (std::abs(s.energies[static_cast<Eigen::Index>(i)] - top) <= 1e-6 * std::max(1.0, std::abs(top))) ++at_top;
  }
  out.summary = {{"states", s.dim()},
                 {"ground_energy", s.energies[0]},
                 {"ground_eta2", s.eta_sq[0]},
                 {"highest_energy", s.energies[s.energies.size() - 1]},
                 {"highest_eta2", s.eta_sq[s.eta_sq.size() - 1]},
                 {"states_at_LU_over_2", at_top}};
  return out;
}

CommandOutput cmd_evolve(const RunConfig& c) {
  CommandOutput out;
  auto m = load_model(c, out);
  const bool replays = !c.postprocess.smooth_sigma_periods.empty() || !c.postprocess.switch_off.empty();
  if (replays && c.output.record_every != 1) {
    throw std::invalid_argument("postprocess replays need output.record_every = 1");
  }
  std::optional<ControlSpec> control;
  if (c.control) control = c.control->resolve(*m, c.drive);
  EvolveOptions opts;
  opts.record_every = c.output.record_every;
  const EvolveResult r = simulate(*m, c.drive, control, c.engine, c.end_time(), opts);
  const Trajectory& traj = r.trajectory;
  const TrajectorySummary ts = trajectory_summary(traj);

  write_trajectory_csv(traj, output_file(c, out, "trajectory.csv").string());
  const FieldSeries field = field_series(traj);
  write_field_csv(field, output_file(c, out, "field.csv").string());
  json meta = trajectory_metadata(traj);
  if (control) meta["control"] = describe(*control);
  write_json(output_file(c, out, "trajectory.json"), meta);

  out.summary = {{"max_eta2_per_L", ts.max_eta_sq_per_site},
                 {"final_eta2_per_L", ts.final_eta_sq_per_site},
                 {"t_of_max", ts.t_of_max},
                 {"t_final", traj.t_final}};
  if (ts.t_act) out.summary["t_act"] = *ts.t_act;

  if (c.output.weights) {
    const SpectralDecomposition s = load_spectrum(c, *m, out);
    const Decomposition d = decompose(r.final_state.amplitudes, s);
    write_weights_csv(d, s, output_file(c, out, "weights.csv").string());
    out.summary["weights"] = {{"states_above_threshold", d.count_above},
                              {"threshold", d.threshold},
                              {"total", d.total()},
                              {"top_levels", levels_summary(d, m->sites(), 5)}};
  }
  if (c.output.stft) {
    stft_outputs(c, field, std::make_pair(c.drive.pulse.start(), traj.t_final), ts.t_act, out);
  }

  if (!c.postprocess.smooth_sigma_periods.empty()) {
    if (!ts.t_act) throw std::runtime_error("smoothing around activation requested but control never activated");
    const double tp = c.drive.pulse.period();
    const double half = c.postprocess.smooth_half_window_periods * tp;
    json runs = json::array();
    for (std::size_t i = 0; i < c.postprocess.smooth_sigma_periods.size(); ++i) {
      const double sigma = c.postprocess.smooth_sigma_periods[i] * tp;
      const FieldSeries smoothed = gaussian_smooth(field, sigma, *ts.t_act - half, *ts.t_act + half);
      const Trajectory rt = replay(*m, c, smoothed, traj.t_final);
      write_trajectory_csv(rt, output_file(c, out, "smoothed_" + std::to_string(i) + ".csv").string());
      runs.push_back({{"sigma", sigma}, {"final_eta2_per_L", rt.final_eta_per_site()}});
    }
    out.summary["smoothing"] = runs;
  }
  if (!c.postprocess.switch_off.empty()) {
    const double t_f = c.drive.horizon();
    json runs = json::array();
    for (std::size_t i = 0; i < c.postprocess.switch_off.size(); ++i) {
      const auto [tau1, tau2] = c.postprocess.switch_off[i];
      const double t1 = t_f + tau1;
      const double t2 = t_f + tau2;
      if (t2 > traj.t_final) throw std::invalid_argument("switch-off interval ends after the horizon");
      const Trajectory rt = replay(*m, c, switch_off(field, t1, t2), traj.t_final);
      double frozen = 0.0;
      std::optional<double> ref;
      for (const auto& s : rt.samples) {
        if (s.t < t2) continue;
        if (!ref) ref = s.eta_sq;
        frozen = std::max(frozen, std::abs(s.eta_sq - *ref));
      }
      write_trajectory_csv(rt, output_file(c, out, "switch_off_" + std::to_string(i) + ".csv").string());
      runs.push_back({{"t1", t1}, {"t2", t2}, {"final_eta2_per_L", rt.final_eta_per_site()},
                      {"eta2_drift_after_t2", frozen}});
    }
    out.summary["switch_off"] = runs;
  }
  return out;
}

CommandOutput cmd_scan(const RunConfig& c, const ProgressFn& progress) {
  CommandOutput out;
  auto m = load_model(c, out);
  std::vector<ControlSpec> controls;
  for (const auto& cc : c.scan_controls) controls.push_back(cc.resolve(*m, c.drive));
  const ScanGrid g = run_grid(*m, c.drive.pulse, controls, c.grid, c.engine, c.workers, progress);

  write_grid_csv(g, controls.empty() ? std::nullopt : std::optional<std::size_t>(0),
                 output_file(c, out, "grid.csv").string());
  write_matrix(g, output_file(c, out, "max.csv"), [](const GridCell& x) { return x.max_per_site; });
  write_matrix(g, output_file(c, out, "final.csv"), [](const GridCell& x) { return x.final_per_site; });
  json best = json::array();
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const std::string tag = std::to_string(k) + "_" + to_string(controls[k].mode);
    if (k > 0) write_grid_csv(g, k, output_file(c, out, "grid_" + tag + ".csv").string());
    write_matrix(g, output_file(c, out, "controlled_" + tag + ".csv"),
                 [k](const GridCell& x) { return x.controlled[k].final_per_site; });
    best.push_back({{"control", describe(controls[k])}, {"best_final_eta2_per_L", g.best_controlled(k).value_or(NAN)}});
  }
  double best_max = 0.0;
  double best_final = 0.0;
  json failed = json::array();
  for (const auto& cell : g.cells) {
    if (!cell.ok()) {
      failed.push_back({{"omega_p", cell.omega}, {"phi0", cell.phi0}, {"error", cell.error}});
      continue;
    }
    best_max = std::max(best_max, cell.max_per_site);
    best_final = std::max(best_final, cell.final_per_site);
  }
  out.partial = !failed.empty();
  out.summary = {{"cells", g.cells.size()},
                 {"failed_cells", failed},
                 {"best_uncontrolled_max_eta2_per_L", best_max},
                 {"best_uncontrolled_final_eta2_per_L", best_final},
                 {"controls", best}};
  return out;
}

CommandOutput cmd_sweep(const RunConfig& c) {
  if (!c.control) throw std::invalid_argument("sweep needs a control block");
  CommandOutput out;
  auto m = load_model(c, out);
  const ControlSpec control = c.control->resolve(*m, c.drive);
  const double horizon = c.end_time();
  SweepCurve curve = activation_sweep(*m, c.drive, control, c.sweep.times(c.drive, horizon), c.engine,
                                      c.sweep.direction, c.workers, horizon);
  if (c.sweep.refine && curve.t_act.size() > 1) {
    // Integration-grid spacing within one coarse step of the optimum.
    const double coarse = curve.t_act[1] - curve.t_act[0];
    const double centre = curve.best_t_act();
    const double dt = default_time_step(c.drive.pulse.omega);
    std::vector<double> fine;
    for (double t = std::max(curve.t_act.front(), centre - coarse); t <= std::min(horizon, centre + coarse);
         t += dt) {
      fine.push_back(t);
    }
    const SweepCurve extra =
        activation_sweep(*m, c.drive, control, fine, c.engine, c.sweep.direction, c.workers, horizon);
    std::vector<std::pair<double, double>> merged;
    for (std::size_t i = 0; i < curve.t_act.size(); ++i) merged.emplace_back(curve.t_act[i], curve.final_per_site[i]);
    for (std::size_t i = 0; i < extra.t_act.size(); ++i) merged.emplace_back(extra.t_act[i], extra.final_per_site[i]);
    std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    curve.t_act.clear();
    curve.final_per_site.clear();
    for (const auto& [t, v] : merged) {
      curve.t_act.push_back(t);
      curve.final_per_site.push_back(v);
    }
  }
  write_sweep_csv(curve, output_file(c, out, "sweep.csv").string());
  out.summary = {{"points", curve.t_act.size()},
                 {"direction", curve.direction == SweepDirection::maximize ? "max" : "min"},
                 {"best_t_act", curve.best_t_act()},
                 {"best_final_eta2_per_L", curve.best_value()},
                 {"uncontrolled_final_eta2_per_L", curve.uncontrolled_final},
                 {"control", describe(control)}};
  if (curve.policy_final) {
    out.summary["policy_final_eta2_per_L"] = *curve.policy_final;
    out.summary["policy_t_act"] = *curve.policy_t_act;
  }
  return out;
}

CommandOutput cmd_stft(const RunConfig& c) {
  CommandOutput out;
  FieldSeries series;
  if (c.stft.input) {
    series = read_field_csv(*c.stft.input);
  } else if (c.stft.synthetic) {
    series = synthetic_signal(c);
    write_field_csv(series, output_file(c, out, "signal.csv").string());
  } else {
    throw std::invalid_argument("stft needs stft.input or stft.synthetic");
  }
  stft_outputs(c, series, std::nullopt, std::nullopt, out);
  return out;
}

int run_command(const std::string& command, const RunConfig& config, const json& config_echo, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  CommandOutput out;
  if (command == "spectrum") {
    out = cmd_spectrum(config);
  } else if (command == "evolve") {
    out = cmd_evolve(config);
  } else if (command == "scan") {
    out = cmd_scan(config, [&](std::size_t done, std::size_t total) {
      if (done % 25 == 0 || done == total) log << "scan: " << done << "/" << total << " cells\n" << std::flush;
    });
  } else if (command == "sweep") {
    out = cmd_sweep(config);
  } else if (command == "stft") {
    out = cmd_stft(config);
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json caches = json::object();
  for (const auto& p : out.caches) caches[p.string()] = git_blob_hash(p);
  json files = json::array();
  for (const auto& p : out.files) files.push_back(p.string());
  const json manifest = {{"command", command},     {"config", config_echo}, {"caches", caches},
                         {"wall_time_s", wall},    {"outputs", files},      {"partial", out.partial},
                         {"summary", out.summary}};
  fs::create_directories(config.output.dir);
  write_json(config.output.dir / "manifest.json", manifest);
  log << out.summary.dump(2) << '\n';
  if (out.partial) {
    log << "warning: some grid cells failed; see failed_cells in the manifest\n";
    return 3;
  }
  return 0;
}

}  // namespace etapair
