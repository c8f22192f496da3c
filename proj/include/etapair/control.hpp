#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <json.hpp>

#include "etapair/evolution.hpp"
#include "etapair/pulses.hpp"

namespace etapair {

/// |<Q>| may exceed q_max by this relative amount before it counts as a stale
/// or wrong q_max; anything smaller is clipped onto the arcsin domain.
inline constexpr double kOvershootTolerance = 1e-9;

/// Phi = arcsin(<Q>/Q_max): d<eta^2>/dt = t_h sin(Phi) <Q> >= 0.
double lyapunov_phi(double q_expect, double q_max);
/// Phi = -arcsin(<Q>/Q_max): d<eta^2>/dt <= 0.
double suppress_phi(double q_expect, double q_max);
/// Phi = -arcsin(<Q>(<eta^2> - eta0^2) / (Q_max eta^2_max)): drives
/// (<eta^2> - eta0^2)^2 down.
double asymptotic_phi(double q_expect, double eta_sq, double q_max, double eta_sq_max, double eta0_sq);

double lyapunov_phi(const ManyBodyState& state, const SparseOperator& q_op, double q_max);
double suppress_phi(const ManyBodyState& state, const SparseOperator& q_op, double q_max);
double asymptotic_phi(const ManyBodyState& state, const SparseOperator& q_op, const SparseOperator& eta_sq_op,
                      double q_max, double eta_sq_max, double eta0_sq);

enum class ControlMode { lyapunov_up, lyapunov_down, asymptotic };

/// Switch when the period-averaged drift (t_h/T_p) int sin(Phi) <Q> dt over
/// the trailing pump period turns negative.
struct WindowedAverage {};
/// Switch when the instantaneous drift t_h sin(Phi) <Q> drops below threshold.
struct DerivativeThreshold {
  double threshold = -1e-3;
};
/// Switch at the first grid time >= t_act.
struct FixedTime {
  double t_act = 0.0;
};
/// Switch at the first t >= delay whose trailing-period drift integral is
/// positive.
struct PostDelayPositiveIntegral {
  double delay = 0.0;
};

using ActivationPolicy = std::variant<WindowedAverage, DerivativeThreshold, FixedTime, PostDelayPositiveIntegral>;

struct ControlSpec {
  ControlMode mode = ControlMode::lyapunov_up;
  double q_max = 0.0;
  double eta_sq_max = 0.0;
  double eta0_sq = 0.0;
  ActivationPolicy activation = WindowedAverage{};

  void validate() const;
  /// Control law evaluated on already-measured expectation values.
  double law(double q_expect, double eta_sq) const;
};

std::string to_string(ControlMode mode);
ControlMode control_mode_from_string(const std::string& name);
nlohmann::json describe(const ActivationPolicy& policy);
nlohmann::json describe(const ControlSpec& spec);

/// (t_h / T_p) times the trapezoidal integral of sin(Phi) <Q> over the
/// trailing `period` ending at `current`. `history` must cover the window;
/// throws std::invalid_argument otherwise.
double windowed_drift(std::span<const Sample> history, const Sample& current, double period, double hopping);

/// Decides whether the pump hands over to the controller at `current`.
/// `current.phi` must be the pump value at current.t. Returns the
/// activation time, or nullopt for "not yet". Windowed policies throw when
/// the history spans less than one period.
std::optional<double> activation_check(std::span<const Sample> history, const Sample& current,
                                       const ActivationPolicy& policy, double period, double hopping);

/// Pump before activation, control law after. Activation is latched. The
/// policy is consulted once per step as soon as one full pump period has
/// elapsed since `pump_onset`.
class ConcatenatedSource final : public FieldSource {
 public:
  ConcatenatedSource(std::unique_ptr<FieldSource> pump, ControlSpec control, double period, double hopping,
                     double pump_onset = 0.0);

  /// Source that is already switched on (used to continue a run from a
  /// snapshot taken at the activation step).
  static std::unique_ptr<ConcatenatedSource> activated_at(std::unique_ptr<FieldSource> pump, ControlSpec control,
                                                          double period, double hopping, double t_act);

  /// In shadow mode the policy is evaluated and the activation time recorded,
  /// but the pump keeps running. Lets one uncontrolled run report where a
  /// controlled run would have switched.
  void set_shadow(bool shadow) noexcept { shadow_ = shadow; }

  bool closed_loop() const override { return true; }
  double field(const FieldContext& ctx) override;
  bool control_active() const override { return active_ && !shadow_; }
  std::optional<double> activation_time() const override { return t_act_; }
  nlohmann::json describe() const override;

  const ControlSpec& control() const noexcept { return control_; }

 private:
  std::unique_ptr<FieldSource> pump_;
  ControlSpec control_;
  double period_;
  double hopping_;
  double onset_ = 0.0;
  bool active_ = false;
  bool shadow_ = false;
  std::optional<double> t_act_;
};

/// True once grid time `t` has reached a requested activation time (with a
/// relative guard of 1e-12 against round-off in the grid times).
bool fixed_time_reached(double t, double t_act);

}  // namespace etapair
