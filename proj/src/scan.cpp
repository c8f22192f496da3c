#include "etapair/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace etapair {

PropagatorConfig EngineConfig::propagator(double omega) const {
  PropagatorConfig c;
  c.dt = default_time_step(omega);
  c.scheme = scheme;
  c.max_subspace = max_subspace;
  c.tolerance = tolerance;
  c.validate();
  return c;
}

void to_json(nlohmann::json& j, const EngineConfig& c) {
  j = {{"scheme", c.scheme == PropagationScheme::krylov ? "krylov" : "chebyshev"},
       {"max_subspace", c.max_subspace},
       {"tolerance", c.tolerance},
       {"steps_per_period", kStepsPerPeriod}};
}

void from_json(const nlohmann::json& j, EngineConfig& c) {
  static const char* keys[] = {"scheme", "max_subspace", "tolerance", "steps_per_period"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw std::invalid_argument("engine: unknown key '" + it.key() + "'");
    }
  }
  if (j.contains("scheme")) {
    const auto s = j.at("scheme").get<std::string>();
    if (s == "krylov") {
      c.scheme = PropagationScheme::krylov;
    } else if (s == "chebyshev") {
      c.scheme = PropagationScheme::chebyshev;
    } else {
      throw std::invalid_argument("engine: unknown scheme '" + s + "'");
    }
  }
  c.max_subspace = j.value("max_subspace", c.max_subspace);
  c.tolerance = j.value("tolerance", c.tolerance);
  // Echoed for the record; the step itself is fixed.
  if (j.contains("steps_per_period") && j.at("steps_per_period").get<double>() != kStepsPerPeriod) {
    throw std::invalid_argument("engine: steps_per_period is fixed at 50");
  }
}

namespace {

std::unique_ptr<ConcatenatedSource> concatenated(const Model& model, const DriveSpec& drive,
                                                 const ControlSpec& control) {
  return std::make_unique<ConcatenatedSource>(drive.source(), control, drive.pulse.period(),
                                              model.config().hopping, drive.pulse.start());
}

// Emits the drive while a set of shadow sources decide where they would
// have switched.
class TeeSource final : public FieldSource {
 public:
  TeeSource(std::unique_ptr<FieldSource> drive, std::vector<std::unique_ptr<ConcatenatedSource>> shadows)
      : drive_(std::move(drive)), shadows_(std::move(shadows)) {
    for (auto& s : shadows_) s->set_shadow(true);
  }
  bool closed_loop() const override { return !shadows_.empty(); }
  double field(const FieldContext& ctx) override {
    for (auto& s : shadows_) s->field(ctx);
    return drive_->field(ctx);
  }
  nlohmann::json describe() const override { return drive_->describe(); }
  const ConcatenatedSource& shadow(std::size_t i) const { return *shadows_[i]; }

 private:
  std::unique_ptr<FieldSource> drive_;
  std::vector<std::unique_ptr<ConcatenatedSource>> shadows_;
};

double max_until(const Trajectory& traj, double t_stop) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    if (s.t > t_stop) break;
    m = std::max(m, s.eta_sq);
  }
  return m / traj.sites;
}

// Continues `snapshot` under an already active controller up to t_end.
BranchOutcome continue_branch(const Model& model, const DriveSpec& drive, const ControlSpec& control,
                              const ManyBodyState& snapshot, double t_end, const TimeGrid& grid,
                              const EngineConfig& engine, const Trajectory& uncontrolled) {
  BranchOutcome b;
  b.t_act = snapshot.t;
  const double before = max_until(uncontrolled, snapshot.t);
  if (snapshot.t >= t_end - 1e-9 * grid.dt) {
    b.final_per_site = uncontrolled.final_eta_per_site();
    b.max_per_site = before;
    return b;
  }
  auto src = ConcatenatedSource::activated_at(drive.source(), control, drive.pulse.period(),
                                              model.config().hopping, snapshot.t);
  Propagator prop(model.family(), engine.propagator(drive.pulse.omega));
  const Trajectory traj = evolve(snapshot, *src, t_end, grid, prop, model.observables(), model.sites());
  b.final_per_site = traj.final_eta_per_site();
  b.max_per_site = std::max(before, trajectory_summary(traj).max_eta_sq_per_site);
  return b;
}

std::string cell_value(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string grid_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

EvolveResult simulate(const Model& model, const DriveSpec& drive, const std::optional<ControlSpec>& control,
                      const EngineConfig& engine, std::optional<double> t_end, const EvolveOptions& options) {
  drive.pulse.validate();
  const PropagatorConfig pc = engine.propagator(drive.pulse.omega);
  Propagator prop(model.family(), pc);
  std::unique_ptr<FieldSource> src = control ? concatenated(model, drive, *control) : drive.source();
  EvolveResult r = evolve_with_state(model.ground().state, *src, t_end.value_or(drive.horizon()),
                                     TimeGrid{0.0, pc.dt}, prop, model.observables(), model.sites(), options);
  r.trajectory.metadata["drive"] = {{"pulse", drive.pulse}, {"double_pulse", drive.double_pulse}};
  return r;
}

ForkedRun run_forked(const Model& model, const DriveSpec& drive, std::span<const ControlSpec> controls,
                     const EngineConfig& engine, std::optional<double> t_end) {
  drive.pulse.validate();
  const double horizon = t_end.value_or(drive.horizon());
  const PropagatorConfig pc = engine.propagator(drive.pulse.omega);
  const TimeGrid grid{0.0, pc.dt};

  std::vector<std::unique_ptr<ConcatenatedSource>> shadows;
  for (const auto& c : controls) shadows.push_back(concatenated(model, drive, c));
  TeeSource tee(drive.source(), std::move(shadows));

  std::vector<std::optional<ManyBodyState>> snapshots(controls.size());
  EvolveOptions options;
  options.on_sample = [&](std::size_t, const ManyBodyState& state, const Sample& s) {
    for (std::size_t i = 0; i < controls.size(); ++i) {
      const auto t = tee.shadow(i).activation_time();
      if (t && *t == s.t && !snapshots[i]) snapshots[i] = state;
    }
  };
  Propagator prop(model.family(), pc);
  const Trajectory uncontrolled =
      evolve(model.ground().state, tee, horizon, grid, prop, model.observables(), model.sites(), options);

  ForkedRun out;
  out.uncontrolled = trajectory_summary(uncontrolled);
  out.uncontrolled.t_act.reset();
  for (std::size_t i = 0; i < controls.size(); ++i) {
    if (!snapshots[i]) {
      out.controlled.push_back({std::nullopt, out.uncontrolled.final_eta_sq_per_site,
                                out.uncontrolled.max_eta_sq_per_site});
      continue;
    }
    out.controlled.push_back(
        continue_branch(model, drive, controls[i], *snapshots[i], horizon, grid, engine, uncontrolled));
  }
  return out;
}

GridSpec GridSpec::standard() { return {range(15.0, 25.0, 0.1), range(0.05, 0.60, 0.05)}; }

std::vector<double> GridSpec::range(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid: bad range");
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) v.push_back(std::stod(grid_value(lo + static_cast<double>(i) * step)));
  return v;
}

void GridSpec::validate() const {
  if (omegas.empty() || phi0s.empty()) throw std::invalid_argument("grid: empty axis");
  for (double w : omegas) {
    if (!(w > 0.0)) throw std::invalid_argument("grid: omega_p must be positive");
  }
}

void to_json(nlohmann::json& j, const GridSpec& g) { j = {{"omega_p", g.omegas}, {"phi0", g.phi0s}}; }

void from_json(const nlohmann::json& j, GridSpec& g) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "omega_p" && it.key() != "phi0") throw std::invalid_argument("grid: unknown key '" + it.key() + "'");
  }
  auto axis = [](const nlohmann::json& a) {
    if (a.is_array()) return a.get<std::vector<double>>();
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (it.key() != "from" && it.key() != "to" && it.key() != "step") {
        throw std::invalid_argument("grid: unknown range key '" + it.key() + "'");
      }
    }
    return GridSpec::range(a.at("from").get<double>(), a.at("to").get<double>(), a.at("step").get<double>());
  };
  if (j.contains("omega_p")) g.omegas = axis(j.at("omega_p"));
  if (j.contains("phi0")) g.phi0s = axis(j.at("phi0"));
}

const GridCell& ScanGrid::at(std::size_t i_omega, std::size_t i_phi0) const {
  return cells.at(i_omega * spec.phi0s.size() + i_phi0);
}

std::size_t ScanGrid::failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const GridCell& c) { return !c.ok(); }));
}

std::optional<double> ScanGrid::best_controlled(std::size_t control_index) const {
  std::optional<double> best;
  for (const auto& c : cells) {
    if (!c.ok()) continue;
    const double v = c.controlled.at(control_index).final_per_site;
    if (!best || v > *best) best = v;
  }
  return best;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f) {
  const auto threads = static_cast<std::size_t>(std::clamp(workers, 1, 256));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ScanGrid run_grid(const Model& model, const PulseSpec& pump_template, std::span<const ControlSpec> controls,
                  const GridSpec& grid, const EngineConfig& engine, int workers, const ProgressFn& progress) {
  grid.validate();
  for (const auto& c : controls) c.validate();
  ScanGrid out;
  out.spec = grid;
  out.controls.assign(controls.begin(), controls.end());
  out.cells.resize(grid.cells());

  std::atomic<std::size_t> done{0};
  std::mutex progress_lock;
  parallel_for(out.cells.size(), workers, [&](std::size_t i) {
    GridCell& cell = out.cells[i];
    cell.omega = grid.omegas[i / grid.phi0s.size()];
    cell.phi0 = grid.phi0s[i % grid.phi0s.size()];
    try {
      DriveSpec drive;
      drive.pulse = pump_template;
      drive.pulse.omega = cell.omega;
      drive.pulse.phi0 = cell.phi0;
      const ForkedRun r = run_forked(model, drive, controls, engine);
      cell.max_per_site = r.uncontrolled.max_eta_sq_per_site;
      cell.final_per_site = r.uncontrolled.final_eta_sq_per_site;
      cell.controlled = r.controlled;
    } catch (const std::exception& e) {
      cell.error = e.what();
      cell.max_per_site = cell.final_per_site = std::numeric_limits<double>::quiet_NaN();
      cell.controlled.assign(controls.size(), {std::nullopt, std::numeric_limits<double>::quiet_NaN(),
                                               std::numeric_limits<double>::quiet_NaN()});
    }
    const std::size_t d = ++done;
    if (progress) {
      std::lock_guard<std::mutex> g(progress_lock);
      progress(d, out.cells.size());
    }
  });
  return out;
}

void write_grid_csv(const ScanGrid& grid, std::optional<std::size_t> control_index, std::ostream& out) {
  out << "omega_p,phi0,max_eta2_per_L,final_eta2_per_L,controlled_final_eta2_per_L,t_act\n";
  for (const auto& c : grid.cells) {
    out << grid_value(c.omega) << ',' << grid_value(c.phi0) << ',' << cell_value(c.max_per_site) << ','
        << cell_value(c.final_per_site) << ',';
    if (control_index) {
      const auto& b = c.controlled.at(*control_index);
      out << cell_value(b.final_per_site) << ',' << (b.t_act ? cell_value(*b.t_act) : std::string());
    } else {
      out << ',';
    }
    out << '\n';
  }
}

void write_grid_csv(const ScanGrid& grid, std::optional<std::size_t> control_index, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_grid_csv(grid, control_index, f);
}

std::size_t SweepCurve::best() const {
  if (final_per_site.empty()) throw std::logic_error("empty sweep");
  const auto it = direction == SweepDirection::maximize
                      ? std::max_element(final_per_site.begin(), final_per_site.end())
                      : std::min_element(final_per_site.begin(), final_per_site.end());
  return static_cast<std::size_t>(it - final_per_site.begin());
}

SweepCurve activation_sweep(const Model& model, const DriveSpec& drive, const ControlSpec& control,
                            std::vector<double> t_act_values, const EngineConfig& engine, SweepDirection direction,
                            int workers, std::optional<double> t_end) {
  drive.pulse.validate();
  control.validate();
  if (t_act_values.empty()) throw std::invalid_argument("sweep: no activation times");
  std::sort(t_act_values.begin(), t_act_values.end());
  if (t_act_values.front() < 0.0) throw std::invalid_argument("sweep: negative activation time");

  const double horizon = t_end.value_or(drive.horizon());
  const PropagatorConfig pc = engine.propagator(drive.pulse.omega);
  const TimeGrid grid{0.0, pc.dt};

  std::vector<std::unique_ptr<ConcatenatedSource>> shadows;
  shadows.push_back(concatenated(model, drive, control));
  TeeSource tee(drive.source(), std::move(shadows));

  // One snapshot per distinct activation grid point; several requested
  // times may share a grid point.
  std::vector<ManyBodyState> snapshots;
  std::vector<std::size_t> snapshot_of(t_act_values.size(), SIZE_MAX);
  std::optional<ManyBodyState> policy_snapshot;
  std::size_t next = 0;
  EvolveOptions options;
  options.on_sample = [&](std::size_t, const ManyBodyState& state, const Sample& s) {
    bool taken = false;
    while (next < t_act_values.size() && fixed_time_reached(s.t, t_act_values[next])) {
      if (!taken) {
        snapshots.push_back(state);
        taken = true;
      }
      snapshot_of[next++] = snapshots.size() - 1;
    }
    const auto t = tee.shadow(0).activation_time();
    if (t && *t == s.t && !policy_snapshot) policy_snapshot = state;
  };
  Propagator prop(model.family(), pc);
  const Trajectory uncontrolled =
      evolve(model.ground().state, tee, horizon, grid, prop, model.observables(), model.sites(), options);

  std::vector<double> per_snapshot(snapshots.size());
  parallel_for(snapshots.size(), workers, [&](std::size_t i) {
    per_snapshot[i] =
        continue_branch(model, drive, control, snapshots[i], horizon, grid, engine, uncontrolled).final_per_site;
  });

  SweepCurve curve;
  curve.direction = direction;
  curve.t_act = t_act_values;
  curve.uncontrolled_final = uncontrolled.final_eta_per_site();
  for (std::size_t i = 0; i < t_act_values.size(); ++i) {
    curve.final_per_site.push_back(snapshot_of[i] == SIZE_MAX ? curve.uncontrolled_final
                                                              : per_snapshot[snapshot_of[i]]);
  }
  if (policy_snapshot) {
    curve.policy_t_act = policy_snapshot->t;
    curve.policy_final =
        continue_branch(model, drive, control, *policy_snapshot, horizon, grid, engine, uncontrolled).final_per_site;
  }
  return curve;
}

void write_sweep_csv(const SweepCurve& curve, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "t_act,final_eta2_per_L\n";
  for (std::size_t i = 0; i < curve.t_act.size(); ++i) {
    f << cell_value(curve.t_act[i]) << ',' << cell_value(curve.final_per_site[i]) << '\n';
  }
}

}  // namespace etapair
