#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "etapair/basis.hpp"
#include "etapair/operators.hpp"
#include "etapair/state.hpp"

namespace etapair {

enum class PropagationScheme { krylov, chebyshev };

struct PropagatorConfig {
  double dt = 0.0;
  PropagationScheme scheme = PropagationScheme::krylov;
  int max_subspace = 30;
  double tolerance = 1e-10;

  void validate() const;
};

/// Time step used throughout: 0.02 of the pump period.
inline constexpr double kStepsPerPeriod = 50.0;
double default_time_step(double omega);

/// exp(-i H(phi) dt) acting on a state, phi held constant over the step.
/// Owns the scratch space, so one instance serves one evolution at a time.
class Propagator {
 public:
  Propagator(const HamiltonianFamily& family, PropagatorConfig config);

  /// Advances `state` in place by `dt` (which may differ from config.dt,
  /// e.g. for a final partial step). Throws std::runtime_error when the
  /// tolerance is not reached within the configured subspace size.
  void step(ManyBodyState& state, double phi, double dt);

  const PropagatorConfig& config() const noexcept { return config_; }
  /// Krylov dimension or Chebyshev order used by the last step.
  int last_order() const noexcept { return last_order_; }

 private:
  void krylov(CVector& psi, double dt);
  void chebyshev(CVector& psi, double dt);

  const HamiltonianFamily* family_;
  PropagatorConfig config_;
  double phase_ = 0.0;
  std::vector<CVector> krylov_basis_;
  CVector w_;
  CVector t0_, t1_, t2_;
  int last_order_ = 0;
};

/// Single-step convenience wrapper around Propagator.
ManyBodyState step(const ManyBodyState& state, double phi, double dt, const HamiltonianFamily& family,
                   const PropagatorConfig& config);

/// Lowest eigenpair of H(0) with residual ||H psi - e psi|| <= 1e-9.
/// The returned vector is real up to a global phase.
struct GroundState {
  double energy;
  ManyBodyState state;
};
GroundState ground_state(const HamiltonianFamily& family, const SectorBasis& basis);

/// One recorded point of an evolution.
struct Sample {
  double t = 0.0;
  double phi = 0.0;
  double eta_sq = 0.0;  // <eta^2>, not divided by L
  double q = 0.0;       // Re <Q>
  double norm = 1.0;
  bool control_active = false;
};

struct Trajectory {
  int sites = 0;
  std::vector<Sample> samples;
  /// <H(0)> per sample, filled only when requested.
  std::vector<double> energy;
  std::optional<double> t_act;
  double t_final = 0.0;
  nlohmann::json metadata = nlohmann::json::object();

  const Sample& final_sample() const { return samples.back(); }
  double final_eta_per_site() const { return samples.back().eta_sq / sites; }
};

/// Everything a field rule may look at when choosing phi for the step that
/// starts at `t`. `history` holds every integration-grid sample before t.
struct FieldContext {
  double t;
  std::size_t step_index;
  const ManyBodyState& state;
  double eta_sq;
  double q;
  std::span<const Sample> history;
};

/// Rule producing the Peierls phase at the start of each step. Open-loop
/// sources must not depend on anything but ctx.t.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  virtual bool closed_loop() const = 0;
  virtual double field(const FieldContext& ctx) = 0;
  virtual bool control_active() const { return false; }
  virtual std::optional<double> activation_time() const { return std::nullopt; }
  virtual nlohmann::json describe() const = 0;
};

/// Phi = 0 everywhere.
class ZeroField final : public FieldSource {
 public:
  bool closed_loop() const override { return false; }
  double field(const FieldContext&) override { return 0.0; }
  nlohmann::json describe() const override { return {{"type", "zero"}}; }
};

/// Operators evaluated along a run.
struct Observables {
  SymmetricForm eta_sq;
  SymmetricForm q;
  /// H(0); needed only when EvolveOptions::record_energy is set.
  const SparseOperator* energy = nullptr;

  Observables() = default;
  Observables(const SparseOperator& eta_sq_op, const SparseOperator& q_op, const SparseOperator* energy_op = nullptr)
      : eta_sq(eta_sq_op), q(q_op), energy(energy_op) {}
};

/// Uniform integration grid t_k = origin + k * dt.
struct TimeGrid {
  double origin = 0.0;
  double dt = 0.0;

  double time(std::size_t k) const { return origin + static_cast<double>(k) * dt; }
  /// Index of the grid point at `t` (which must lie on the grid).
  std::size_t index_of(double t) const;
};

struct EvolveOptions {
  /// Keep every n-th sample in the returned trajectory. The integration
  /// grid and the history seen by the field source are never thinned.
  int record_every = 1;
  bool record_energy = false;
  /// Called after the sample at grid index k is recorded and before the
  /// step out of it is taken.
  std::function<void(std::size_t k, const ManyBodyState&, const Sample&)> on_sample;
};

/// Integrates from `initial` (whose time must lie on `grid`) up to `t_end`.
/// Steps use grid.dt except a shorter last step that lands exactly on t_end.
/// Phi for each step is evaluated from the state at the step start and held
/// constant across it.
Trajectory evolve(ManyBodyState initial, FieldSource& source, double t_end, const TimeGrid& grid,
                  Propagator& propagator, const Observables& obs, int sites, const EvolveOptions& options = {});

/// Same, returning the final state as well.
struct EvolveResult {
  Trajectory trajectory;
  ManyBodyState final_state;
};
EvolveResult evolve_with_state(ManyBodyState initial, FieldSource& source, double t_end, const TimeGrid& grid,
                               Propagator& propagator, const Observables& obs, int sites,
                               const EvolveOptions& options = {});

/// CSV columns: t,phi,eta2_per_L,q_expect,norm,control_active
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
nlohmann::json trajectory_metadata(const Trajectory& traj);

}  // namespace etapair
