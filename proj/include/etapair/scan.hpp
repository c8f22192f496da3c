#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "etapair/analysis.hpp"
#include "etapair/control.hpp"
#include "etapair/model.hpp"
#include "etapair/pulses.hpp"

namespace etapair {

/// Numerical settings shared by every evolution of a command. The step is
/// always 1/kStepsPerPeriod of the pump period.
struct EngineConfig {
  PropagationScheme scheme = PropagationScheme::krylov;
  int max_subspace = 30;
  double tolerance = 1e-10;

  PropagatorConfig propagator(double omega) const;
};

void to_json(nlohmann::json& j, const EngineConfig& c);
void from_json(const nlohmann::json& j, EngineConfig& c);

/// One evolution from the ground state: the drive alone, or the drive
/// handing over to `control`. Runs up to `t_end` (default: the drive's
/// horizon).
EvolveResult simulate(const Model& model, const DriveSpec& drive, const std::optional<ControlSpec>& control,
                      const EngineConfig& engine, std::optional<double> t_end = std::nullopt,
                      const EvolveOptions& options = {});

/// Outcome of a controlled run reconstructed from the uncontrolled one.
struct BranchOutcome {
  std::optional<double> t_act;
  double final_per_site = 0.0;
  double max_per_site = 0.0;
};

struct ForkedRun {
  TrajectorySummary uncontrolled;
  std::vector<BranchOutcome> controlled;  // one per requested control
};

/// Runs the drive once without control while every control's activation
/// policy watches in shadow mode. Each controlled run is then continued from
/// a copy of the state at its activation step, which reproduces the direct
/// concatenated run bit for bit at a fraction of the cost.
ForkedRun run_forked(const Model& model, const DriveSpec& drive, std::span<const ControlSpec> controls,
                     const EngineConfig& engine, std::optional<double> t_end = std::nullopt);

struct GridSpec {
  std::vector<double> omegas;
  std::vector<double> phi0s;

  /// omega_p 15.0..25.0 step 0.1, Phi_0 0.05..0.60 step 0.05.
  static GridSpec standard();
  /// lo, lo + step, ... up to hi inclusive, each value rounded to 12
  /// significant digits so that printed grids are clean.
  static std::vector<double> range(double lo, double hi, double step);
  std::size_t cells() const noexcept { return omegas.size() * phi0s.size(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const GridSpec& g);
/// Accepts either explicit lists ("omega_p", "phi0") or ranges
/// ("omega_p": {"from", "to", "step"}).
void from_json(const nlohmann::json& j, GridSpec& g);

struct GridCell {
  double omega = 0.0;
  double phi0 = 0.0;
  double max_per_site = 0.0;
  double final_per_site = 0.0;
  std::vector<BranchOutcome> controlled;
  std::string error;  // empty on success

  bool ok() const noexcept { return error.empty(); }
};

struct ScanGrid {
  GridSpec spec;
  std::vector<ControlSpec> controls;
  std::vector<GridCell> cells;  // omega-major: index = i_omega * |phi0| + i_phi0

  const GridCell& at(std::size_t i_omega, std::size_t i_phi0) const;
  std::size_t failures() const;
  /// Largest controlled final value over successful cells.
  std::optional<double> best_controlled(std::size_t control_index) const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Every cell is an independent forked run of `pump_template` with the
/// cell's (omega_p, Phi_0). Results land in a preallocated slot per cell, so
/// the output does not depend on `workers`. A failing cell records its error
/// and the scan continues.
ScanGrid run_grid(const Model& model, const PulseSpec& pump_template, std::span<const ControlSpec> controls,
                  const GridSpec& grid, const EngineConfig& engine, int workers = 1, const ProgressFn& progress = {});

/// CSV columns omega_p,phi0,max_eta2_per_L,final_eta2_per_L,
/// controlled_final_eta2_per_L,t_act for the given control (or none: the
/// controlled columns stay empty). Failed cells print "nan".
void write_grid_csv(const ScanGrid& grid, std::optional<std::size_t> control_index, std::ostream& out);
void write_grid_csv(const ScanGrid& grid, std::optional<std::size_t> control_index, const std::string& path);

enum class SweepDirection { maximize, minimize };

struct SweepCurve {
  std::vector<double> t_act;
  std::vector<double> final_per_site;
  double uncontrolled_final = 0.0;
  /// Result with the control's own activation policy.
  std::optional<double> policy_final;
  std::optional<double> policy_t_act;
  SweepDirection direction = SweepDirection::maximize;

  std::size_t best() const;
  double best_value() const { return final_per_site.at(best()); }
  double best_t_act() const { return t_act.at(best()); }
};

/// Final <eta^2>/L as a function of a fixed activation time. `control`
/// supplies the law; its activation policy only produces the reference
/// value. Activation times past the horizon give the uncontrolled value.
SweepCurve activation_sweep(const Model& model, const DriveSpec& drive, const ControlSpec& control,
                            std::vector<double> t_act_values, const EngineConfig& engine, SweepDirection direction,
                            int workers = 1, std::optional<double> t_end = std::nullopt);

void write_sweep_csv(const SweepCurve& curve, const std::string& path);

/// Runs f(i) for i in [0, n) on `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f);

}  // namespace etapair
