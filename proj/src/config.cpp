#include "etapair/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace etapair {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
  }
}

ControlConfig parse_control(const json& j) {
  check_keys(j, {"mode", "eta0_sq", "activation"}, "control");
  ControlConfig c;
  c.mode = control_mode_from_string(j.value("mode", std::string("lyapunov_up")));
  if (j.contains("eta0_sq")) c.eta0_sq = j.at("eta0_sq").get<double>();
  if (j.contains("activation")) c.activation = j.at("activation");
  // Validate the activation block early, with a placeholder drive.
  parse_activation(c.activation, DriveSpec{});
  return c;
}

std::vector<double> time_list(const json& j, const std::string& where) {
  if (j.is_array()) return j.get<std::vector<double>>();
  check_keys(j, {"from", "to", "step"}, where);
  return GridSpec::range(j.at("from").get<double>(), j.at("to").get<double>(), j.at("step").get<double>());
}

}  // namespace

ActivationPolicy parse_activation(const json& j, const DriveSpec& drive) {
  const std::string type = j.value("type", std::string());
  if (type == "windowed_average") {
    check_keys(j, {"type"}, "activation");
    return WindowedAverage{};
  }
  if (type == "derivative_threshold") {
    check_keys(j, {"type", "threshold"}, "activation");
    return DerivativeThreshold{j.value("threshold", -1e-3)};
  }
  if (type == "fixed") {
    check_keys(j, {"type", "t_act"}, "activation");
    return FixedTime{j.at("t_act").get<double>()};
  }
  if (type == "post_delay_positive_integral") {
    check_keys(j, {"type", "delay"}, "activation");
    const json d = j.value("delay", json("auto"));
    if (d.is_string()) {
      if (d.get<std::string>() != "auto") throw std::invalid_argument("activation: delay must be a number or \"auto\"");
      return PostDelayPositiveIntegral{drive.pulse.repeat_delay()};
    }
    return PostDelayPositiveIntegral{d.get<double>()};
  }
  throw std::invalid_argument("activation: unknown type '" + type + "'");
}

ControlSpec ControlConfig::resolve(const Model& model, const DriveSpec& drive) const {
  return model.control(mode, parse_activation(activation, drive), eta0_sq);
}

std::vector<double> SweepConfig::times(const DriveSpec& drive, double horizon) const {
  if (t_act.is_string()) {
    if (t_act.get<std::string>() != "auto") throw std::invalid_argument("sweep: t_act must be a list, range or \"auto\"");
    // Enhancement: from the pump onset; suppression: from the second copy.
    const double from = drive.double_pulse ? drive.pulse.repeat_delay() : drive.pulse.start();
    return GridSpec::range(from, horizon, drive.pulse.period() / 4.0);
  }
  return time_list(t_act, "sweep.t_act");
}

StftConfig StftSettings::resolve(double period) const {
  StftConfig c;
  c.sigma = sigma_periods * period;
  c.hop = hop_periods * period;
  c.freq_min = freq_min;
  c.freq_max = freq_max;
  c.freq_step = freq_step;
  c.validate();
  return c;
}

RunConfig parse_config(const json& j) {
  check_keys(j, {"system", "pulse", "drive", "control", "engine", "output", "horizon", "scan", "sweep", "postprocess",
                 "stft", "cache_dir", "workers", "seed"},
             "config");
  RunConfig c;
  if (j.contains("system")) c.system = j.at("system").get<SystemConfig>();
  c.system.validate();
  if (j.contains("pulse")) c.drive.pulse = j.at("pulse").get<PulseSpec>();
  c.drive.pulse.validate();
  if (j.contains("drive")) {
    const auto d = j.at("drive").get<std::string>();
    if (d != "single" && d != "double") throw std::invalid_argument("drive: expected \"single\" or \"double\"");
    c.drive.double_pulse = d == "double";
  }
  if (j.contains("control") && !j.at("control").is_null()) c.control = parse_control(j.at("control"));
  if (j.contains("engine")) c.engine = j.at("engine").get<EngineConfig>();
  c.engine.propagator(c.drive.pulse.omega);

  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"dir", "record_every", "weights", "stft"}, "output");
    c.output.dir = o.value("dir", c.output.dir.string());
    c.output.record_every = o.value("record_every", c.output.record_every);
    c.output.weights = o.value("weights", c.output.weights);
    c.output.stft = o.value("stft", c.output.stft);
    if (c.output.record_every < 1) throw std::invalid_argument("output: record_every must be >= 1");
  }
  if (j.contains("horizon") && !j.at("horizon").is_null()) {
    c.horizon = j.at("horizon").get<double>();
    if (!(*c.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  }
  if (j.contains("scan")) {
    const json& s = j.at("scan");
    check_keys(s, {"grid", "controls"}, "scan");
    if (s.contains("grid")) {
      c.grid = GridSpec::standard();
      from_json(s.at("grid"), c.grid);
    }
    for (const auto& cc : s.value("controls", json::array())) c.scan_controls.push_back(parse_control(cc));
  }
  c.grid.validate();
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"t_act", "direction", "refine"}, "sweep");
    if (s.contains("t_act")) c.sweep.t_act = s.at("t_act");
    const auto dir = s.value("direction", std::string("max"));
    if (dir != "max" && dir != "min") throw std::invalid_argument("sweep: direction must be \"max\" or \"min\"");
    c.sweep.direction = dir == "max" ? SweepDirection::maximize : SweepDirection::minimize;
    c.sweep.refine = s.value("refine", false);
    c.sweep.times(c.drive, c.end_time());
  }
  if (j.contains("postprocess")) {
    const json& p = j.at("postprocess");
    check_keys(p, {"smooth_sigma_periods", "smooth_half_window_periods", "switch_off"}, "postprocess");
    c.postprocess.smooth_sigma_periods = p.value("smooth_sigma_periods", std::vector<double>{});
    c.postprocess.smooth_half_window_periods = p.value("smooth_half_window_periods", 0.5);
    for (const auto& iv : p.value("switch_off", json::array())) {
      const auto v = iv.get<std::vector<double>>();
      if (v.size() != 2 || !(v[1] > v[0])) throw std::invalid_argument("postprocess: switch_off needs [tau1, tau2]");
      c.postprocess.switch_off.emplace_back(v[0], v[1]);
    }
    for (double s : c.postprocess.smooth_sigma_periods) {
      if (!(s > 0.0)) throw std::invalid_argument("postprocess: smoothing sigma must be positive");
    }
  }
  if (j.contains("stft")) {
    const json& s = j.at("stft");
    check_keys(s, {"input", "synthetic", "sigma_periods", "hop_periods", "freq_min", "freq_max", "freq_step"}, "stft");
    if (s.contains("input")) c.stft.input = s.at("input").get<std::string>();
    if (s.contains("synthetic")) {
      c.stft.synthetic = s.at("synthetic").get<std::string>();
      if (*c.stft.synthetic != "sinusoid" && *c.stft.synthetic != "chirp") {
        throw std::invalid_argument("stft: synthetic must be \"sinusoid\" or \"chirp\"");
      }
    }
    c.stft.sigma_periods = s.value("sigma_periods", c.stft.sigma_periods);
    c.stft.hop_periods = s.value("hop_periods", c.stft.hop_periods);
    c.stft.freq_min = s.value("freq_min", c.stft.freq_min);
    c.stft.freq_max = s.value("freq_max", c.stft.freq_max);
    c.stft.freq_step = s.value("freq_step", c.stft.freq_step);
    c.stft.resolve(c.drive.pulse.period());
  }
  c.cache_dir = j.value("cache_dir", c.cache_dir.string());
  c.workers = j.value("workers", c.workers);
  if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<std::string> preset_names() { return {"fig1b", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"}; }

json preset(const std::string& name) {
  const json resonant = {{"phi0", 0.2}, {"omega_p", 19.1}, {"n_p", 54}, {"t_l", 5.0}, {"t_r", 5.0}};
  const json seeded = {{"phi0", 0.2}, {"omega_p", 18.0}, {"n_p", 54}, {"t_l", 5.0}, {"t_r", 5.0}};
  const json lc = {{"mode", "lyapunov_up"}, {"activation", {{"type", "windowed_average"}}}};
  const json ac = {{"mode", "asymptotic"}, {"eta0_sq", 20.0}, {"activation", {{"type", "windowed_average"}}}};

  if (name == "fig1b") {
    return {{"pulse", resonant}, {"output", {{"dir", "out/fig1b"}, {"weights", true}}}};
  }
  if (name == "fig2") {
    return {{"pulse", resonant},
            {"scan",
             {{"grid", {{"omega_p", {{"from", 15.0}, {"to", 25.0}, {"step", 0.1}}},
                        {"phi0", {{"from", 0.05}, {"to", 0.60}, {"step", 0.05}}}}},
              {"controls", {lc, ac}}}},
            {"output", {{"dir", "out/fig2"}}}};
  }
  if (name == "fig3") {
    return {{"pulse", seeded}, {"control", lc}, {"output", {{"dir", "out/fig3"}, {"weights", true}, {"stft", true}}}};
  }
  if (name == "fig4") {
    return {{"pulse", {{"phi0", 0.4}, {"omega_p", 17.0}, {"n_p", 54}, {"t_l", 5.0}, {"t_r", 5.0}}},
            {"control", lc},
            {"sweep", {{"t_act", "auto"}, {"direction", "max"}}},
            {"output", {{"dir", "out/fig4"}}}};
  }
  if (name == "fig5" || name == "fig5b") {
    return {{"pulse", resonant},
            {"drive", "double"},
            {"control", {{"mode", "lyapunov_down"}, {"activation", {{"type", "post_delay_positive_integral"},
                                                                    {"delay", "auto"}}}}},
            {"sweep", {{"t_act", "auto"}, {"direction", "min"}, {"refine", true}}},
            {"output", {{"dir", "out/fig5"}}}};
  }
  if (name == "fig6") {
    return {{"pulse", seeded},
            {"control", lc},
            {"postprocess", {{"smooth_sigma_periods", {0.0625, 0.125, 0.25}}, {"smooth_half_window_periods", 0.5}}},
            {"output", {{"dir", "out/fig6"}}}};
  }
  if (name == "fig7") {
    return {{"pulse", seeded},
            {"control", lc},
            {"horizon", 60.0},
            {"postprocess", {{"switch_off", {{-5.0, 0.0}, {0.0, 5.0}, {5.0, 15.0}}}}},
            {"output", {{"dir", "out/fig7"}}}};
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

std::string preset_command(const std::string& name) {
  if (name == "fig2") return "scan";
  if (name == "fig4" || name == "fig5" || name == "fig5b") return "sweep";
  if (name == "fig1b" || name == "fig3" || name == "fig6" || name == "fig7") return "evolve";
  throw std::invalid_argument("unknown preset '" + name + "'");
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace etapair
