#include "etapair/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etapair {

namespace {

// arcsin with the floating-point guard: ratios within the tolerance of +-1
// are clipped, larger ones mean the normalisation constant is wrong.
double guarded_arcsin(double ratio) {
  if (std::abs(ratio) > 1.0 + kOvershootTolerance) {
    throw std::domain_error("control argument outside [-1, 1]: stale or wrong Q_max");
  }
  return std::asin(std::clamp(ratio, -1.0, 1.0));
}

}  // namespace

double lyapunov_phi(double q_expect, double q_max) {
  if (!(q_max > 0.0)) throw std::invalid_argument("q_max must be positive");
  return guarded_arcsin(q_expect / q_max);
}

double suppress_phi(double q_expect, double q_max) { return -lyapunov_phi(q_expect, q_max); }

double asymptotic_phi(double q_expect, double eta_sq, double q_max, double eta_sq_max, double eta0_sq) {
  if (!(q_max > 0.0) || !(eta_sq_max > 0.0)) throw std::invalid_argument("q_max and eta_sq_max must be positive");
  return -guarded_arcsin(q_expect * (eta_sq - eta0_sq) / (q_max * eta_sq_max));
}

double lyapunov_phi(const ManyBodyState& state, const SparseOperator& q_op, double q_max) {
  return lyapunov_phi(expectation(q_op, state).real(), q_max);
}

double suppress_phi(const ManyBodyState& state, const SparseOperator& q_op, double q_max) {
  return suppress_phi(expectation(q_op, state).real(), q_max);
}

double asymptotic_phi(const ManyBodyState& state, const SparseOperator& q_op, const SparseOperator& eta_sq_op,
                      double q_max, double eta_sq_max, double eta0_sq) {
  return asymptotic_phi(expectation(q_op, state).real(), expectation(eta_sq_op, state).real(), q_max, eta_sq_max,
                        eta0_sq);
}

void ControlSpec::validate() const {
  if (!(q_max > 0.0)) throw std::invalid_argument("control: q_max must be positive");
  if (!(eta_sq_max > 0.0)) throw std::invalid_argument("control: eta_sq_max must be positive");
  if (mode == ControlMode::asymptotic && (eta0_sq < 0.0 || eta0_sq > eta_sq_max)) {
    throw std::invalid_argument("control: eta0_sq must lie in [0, eta_sq_max]");
  }
}

double ControlSpec::law(double q_expect, double eta_sq) const {
  switch (mode) {
    case ControlMode::lyapunov_up:
      return lyapunov_phi(q_expect, q_max);
    case ControlMode::lyapunov_down:
      return suppress_phi(q_expect, q_max);
    case ControlMode::asymptotic:
      return asymptotic_phi(q_expect, eta_sq, q_max, eta_sq_max, eta0_sq);
  }
  throw std::logic_error("unknown control mode");
}

std::string to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::lyapunov_up:
      return "lyapunov_up";
    case ControlMode::lyapunov_down:
      return "lyapunov_down";
    case ControlMode::asymptotic:
      return "asymptotic";
  }
  return "unknown";
}

ControlMode control_mode_from_string(const std::string& name) {
  if (name == "lyapunov_up") return ControlMode::lyapunov_up;
  if (name == "lyapunov_down") return ControlMode::lyapunov_down;
  if (name == "asymptotic") return ControlMode::asymptotic;
  throw std::invalid_argument("unknown control mode '" + name + "'");
}

nlohmann::json describe(const ActivationPolicy& policy) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, WindowedAverage>) {
          return {{"type", "windowed_average"}};
        } else if constexpr (std::is_same_v<P, DerivativeThreshold>) {
          return {{"type", "derivative_threshold"}, {"threshold", p.threshold}};
        } else if constexpr (std::is_same_v<P, FixedTime>) {
          return {{"type", "fixed"}, {"t_act", p.t_act}};
        } else {
          return {{"type", "post_delay_positive_integral"}, {"delay", p.delay}};
        }
      },
      policy);
}

nlohmann::json describe(const ControlSpec& spec) {
  nlohmann::json j = {{"mode", to_string(spec.mode)},
                      {"q_max", spec.q_max},
                      {"eta_sq_max", spec.eta_sq_max},
                      {"activation", describe(spec.activation)}};
  if (spec.mode == ControlMode::asymptotic) j["eta0_sq"] = spec.eta0_sq;
  return j;
}

double windowed_drift(std::span<const Sample> history, const Sample& current, double period, double hopping) {
  const double start = current.t - period;
  const double slack = 1e-9 * period;
  if (history.empty() || history.front().t > start + slack) {
    throw std::invalid_argument("activation check: insufficient history");
  }
  auto integrand = [&](const Sample& s) { return std::sin(s.phi) * s.q; };
  // Walk back over the trailing window, trapezoid on the recorded grid.
  double integral = 0.0;
  const Sample* right = &current;
  for (std::size_t i = history.size(); i-- > 0;) {
    const Sample& left = history[i];
    if (left.t < start - slack) break;
    integral += 0.5 * (integrand(left) + integrand(*right)) * (right->t - left.t);
    right = &left;
  }
  return hopping / period * integral;
}

std::optional<double> activation_check(std::span<const Sample> history, const Sample& current,
                                       const ActivationPolicy& policy, double period, double hopping) {
  return std::visit(
      [&](const auto& p) -> std::optional<double> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, WindowedAverage>) {
          if (windowed_drift(history, current, period, hopping) < 0.0) return current.t;
        } else if constexpr (std::is_same_v<P, DerivativeThreshold>) {
          if (hopping * std::sin(current.phi) * current.q < p.threshold) return current.t;
        } else if constexpr (std::is_same_v<P, FixedTime>) {
          if (fixed_time_reached(current.t, p.t_act)) return current.t;
        } else {
          if (current.t >= p.delay && windowed_drift(history, current, period, hopping) > 0.0) return current.t;
        }
        return std::nullopt;
      },
      policy);
}

ConcatenatedSource::ConcatenatedSource(std::unique_ptr<FieldSource> pump, ControlSpec control, double period,
                                       double hopping, double pump_onset)
    : pump_(std::move(pump)), control_(control), period_(period), hopping_(hopping), onset_(pump_onset) {
  if (!pump_) throw std::invalid_argument("concatenated source needs a pump");
  if (!(period > 0.0)) throw std::invalid_argument("pump period must be positive");
  control_.validate();
}

std::unique_ptr<ConcatenatedSource> ConcatenatedSource::activated_at(std::unique_ptr<FieldSource> pump,
                                                                     ControlSpec control, double period,
                                                                     double hopping, double t_act) {
  auto src = std::make_unique<ConcatenatedSource>(std::move(pump), control, period, hopping);
  src->active_ = true;
  src->t_act_ = t_act;
  return src;
}

double ConcatenatedSource::field(const FieldContext& ctx) {
  if (!active_) {
    const double pump_value = pump_->field(ctx);
    const Sample current{ctx.t, pump_value, ctx.eta_sq, ctx.q, 1.0, false};
    const bool fixed = std::holds_alternative<FixedTime>(control_.activation);
    const double since = std::min(ctx.t - onset_, ctx.history.empty() ? 0.0 : ctx.t - ctx.history.front().t);
    const bool ready = fixed || since >= period_ * (1.0 - 1e-9);
    if (ready) {
      if (auto t = activation_check(ctx.history, current, control_.activation, period_, hopping_)) {
        active_ = true;
        t_act_ = *t;
      }
    }
    if (!active_) return pump_value;
  }
  if (shadow_) return pump_->field(ctx);
  return control_.law(ctx.q, ctx.eta_sq);
}

nlohmann::json ConcatenatedSource::describe() const {
  nlohmann::json j = {{"type", "concatenated"}, {"pump", pump_->describe()}, {"control", etapair::describe(control_)}};
  if (t_act_) j["t_act"] = *t_act_;
  if (shadow_) j["shadow"] = true;
  return j;
}

bool fixed_time_reached(double t, double t_act) { return t >= t_act - 1e-12 * std::max(1.0, std::abs(t_act)); }

}  // namespace etapair
