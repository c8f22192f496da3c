#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "etapair/evolution.hpp"

namespace etapair {

/// sin^2-envelope pump: N_p carrier cycles after an idle time t_l, followed
/// by an idle time t_r before the measurement time t_f.
struct PulseSpec {
  double phi0 = 0.2;
  double omega = 19.1;
  int cycles = 54;
  double idle_before = 5.0;
  double idle_after = 5.0;

  double period() const;
  double duration() const { return cycles * period(); }
  double start() const { return idle_before; }
  double end() const { return idle_before + duration(); }
  double t_final() const { return idle_before + duration() + idle_after; }
  /// Offset of the second copy in the double pulse.
  double repeat_delay() const { return t_final(); }

  void validate() const;
};

void to_json(nlohmann::json& j, const PulseSpec& p);
void from_json(const nlohmann::json& j, PulseSpec& p);

/// Phi(t) = phi0 sin(w tau) sin^2(w tau / 2N_p) on tau = t - t_l in [0, N_p T_p].
double pump_phi(const PulseSpec& spec, double t);

/// Two identical pumps, the second delayed by repeat_delay().
double double_pulse_phi(const PulseSpec& spec, double t);

/// Uniformly sampled field values.
struct FieldSeries {
  std::vector<double> t;
  std::vector<double> phi;

  std::size_t size() const noexcept { return t.size(); }
};

FieldSeries field_series(const Trajectory& traj);

/// Smooths `series` inside [window_begin, window_end] by convolution with a
/// Gaussian of width `sigma`, truncated at 4 sigma and renormalised over the
/// samples it covers. The result is blended linearly back to the input
/// towards both window edges, so the field stays continuous there. Samples
/// outside the window are untouched.
FieldSeries gaussian_smooth(const FieldSeries& series, double sigma, double window_begin, double window_end);

/// Multiplies by 1 before t1, cos^2(pi/2 (t - t1)/(t2 - t1)) on [t1, t2), 0 after.
double switch_off_factor(double t, double t1, double t2);
FieldSeries switch_off(const FieldSeries& series, double t1, double t2);

class PumpSource final : public FieldSource {
 public:
  explicit PumpSource(PulseSpec spec) : spec_(spec) {}
  bool closed_loop() const override { return false; }
  double field(const FieldContext& ctx) override { return pump_phi(spec_, ctx.t); }
  nlohmann::json describe() const override;
  const PulseSpec& spec() const noexcept { return spec_; }

 private:
  PulseSpec spec_;
};

class DoublePulseSource final : public FieldSource {
 public:
  explicit DoublePulseSource(PulseSpec spec) : spec_(spec) {}
  bool closed_loop() const override { return false; }
  double field(const FieldContext& ctx) override { return double_pulse_phi(spec_, ctx.t); }
  nlohmann::json describe() const override;

 private:
  PulseSpec spec_;
};

/// Open-loop replay of recorded samples, linearly interpolated between them
/// and zero outside the recorded range.
class ReplaySource final : public FieldSource {
 public:
  explicit ReplaySource(FieldSeries series);
  bool closed_loop() const override { return false; }
  double field(const FieldContext& ctx) override { return value(ctx.t); }
  double value(double t) const;
  nlohmann::json describe() const override;

 private:
  FieldSeries series_;
};

/// Open-loop drive of a run: one pump, or the pump repeated once. The
/// horizon is the measurement time after the last copy.
struct DriveSpec {
  PulseSpec pulse;
  bool double_pulse = false;

  double horizon() const { return double_pulse ? pulse.t_final() + pulse.repeat_delay() : pulse.t_final(); }
  std::unique_ptr<FieldSource> source() const;
};

/// Field files share the trajectory CSV layout; only the t and phi columns
/// are read.
FieldSeries read_field_csv(const std::string& path);
void write_field_csv(const FieldSeries& series, const std::string& path);

}  // namespace etapair
