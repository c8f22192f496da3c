#include "etapair/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace etapair {

double PulseSpec::period() const { return 2.0 * std::numbers::pi / omega; }

void PulseSpec::validate() const {
  if (!(omega > 0.0)) throw std::invalid_argument("pulse: omega_p must be positive");
  if (cycles < 1) throw std::invalid_argument("pulse: N_p must be >= 1");
  if (idle_before < 0.0 || idle_after < 0.0) throw std::invalid_argument("pulse: idle times must be non-negative");
}

void to_json(nlohmann::json& j, const PulseSpec& p) {
  j = {{"phi0", p.phi0}, {"omega_p", p.omega}, {"n_p", p.cycles}, {"t_l", p.idle_before}, {"t_r", p.idle_after}};
}

void from_json(const nlohmann::json& j, PulseSpec& p) {
  static const char* keys[] = {"phi0", "omega_p", "n_p", "t_l", "t_r"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw std::invalid_argument("pulse: unknown key '" + it.key() + "'");
    }
  }
  p.phi0 = j.value("phi0", p.phi0);
  p.omega = j.value("omega_p", p.omega);
  p.cycles = j.value("n_p", p.cycles);
  p.idle_before = j.value("t_l", p.idle_before);
  p.idle_after = j.value("t_r", p.idle_after);
}

double pump_phi(const PulseSpec& spec, double t) {
  const double tau = t - spec.idle_before;
  if (tau < 0.0 || tau > spec.duration()) return 0.0;
  const double envelope = std::sin(spec.omega * tau / (2.0 * spec.cycles));
  return spec.phi0 * std::sin(spec.omega * tau) * envelope * envelope;
}

double double_pulse_phi(const PulseSpec& spec, double t) {
  return pump_phi(spec, t) + pump_phi(spec, t - spec.repeat_delay());
}

FieldSeries field_series(const Trajectory& traj) {
  FieldSeries s;
  s.t.reserve(traj.samples.size());
  s.phi.reserve(traj.samples.size());
  for (const auto& x : traj.samples) {
    s.t.push_back(x.t);
    s.phi.push_back(x.phi);
  }
  return s;
}

FieldSeries gaussian_smooth(const FieldSeries& series, double sigma, double window_begin, double window_end) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
  if (series.size() < 2 || !(window_end > window_begin)) throw std::invalid_argument("gaussian_smooth: empty window");
  if (window_begin < series.t.front() || window_end > series.t.back()) {
    throw std::invalid_argument("gaussian_smooth: window exceeds samples");
  }
  FieldSeries out = series;
  const double reach = 4.0 * sigma;
  const double mid = 0.5 * (window_begin + window_end);
  const double half = 0.5 * (window_end - window_begin);
  const std::size_t n = series.size();

  for (std::size_t i = 0; i < n; ++i) {
    const double ti = series.t[i];
    if (ti < window_begin || ti > window_end) continue;
    double num = 0.0;
    double den = 0.0;
    // Samples are sorted; walk outwards from i until the kernel is cut off.
    for (std::size_t j = i;; --j) {
      const double d = (ti - series.t[j]) / sigma;
      if (series.t[j] < ti - reach) break;
      const double w = std::exp(-0.5 * d * d);
      num += w * series.phi[j];
      den += w;
      if (j == 0) break;
    }
    for (std::size_t j = i + 1; j < n && series.t[j] <= ti + reach; ++j) {
      const double d = (series.t[j] - ti) / sigma;
      const double w = std::exp(-0.5 * d * d);
      num += w * series.phi[j];
      den += w;
    }
    const double smoothed = num / den;
    const double blend = std::clamp(1.0 - std::abs(ti - mid) / half, 0.0, 1.0);
    out.phi[i] = (1.0 - blend) * series.phi[i] + blend * smoothed;
  }
  return out;
}

double switch_off_factor(double t, double t1, double t2) {
  if (!(t2 > t1)) throw std::invalid_argument("switch_off: t2 must exceed t1");
  if (t < t1) return 1.0;
  if (t >= t2) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * (t - t1) / (t2 - t1));
  return c * c;
}

FieldSeries switch_off(const FieldSeries& series, double t1, double t2) {
  FieldSeries out = series;
  for (std::size_t i = 0; i < out.size(); ++i) out.phi[i] *= switch_off_factor(out.t[i], t1, t2);
  return out;
}

nlohmann::json PumpSource::describe() const { return {{"type", "pump"}, {"pulse", spec_}}; }

nlohmann::json DoublePulseSource::describe() const {
  return {{"type", "double_pulse"}, {"pulse", spec_}, {"delay", spec_.repeat_delay()}};
}

ReplaySource::ReplaySource(FieldSeries series) : series_(std::move(series)) {
  if (series_.t.size() != series_.phi.size()) throw std::invalid_argument("replay: column length mismatch");
  if (!std::is_sorted(series_.t.begin(), series_.t.end())) throw std::invalid_argument("replay: times not sorted");
}

double ReplaySource::value(double t) const {
  const auto& ts = series_.t;
  if (ts.empty() || t < ts.front() || t > ts.back()) return 0.0;
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  const auto i = static_cast<std::size_t>(it - ts.begin());
  if (*it == t || i == 0) return series_.phi[i];
  const double t0 = ts[i - 1];
  const double t1 = ts[i];
  const double f = (t - t0) / (t1 - t0);
  return series_.phi[i - 1] + f * (series_.phi[i] - series_.phi[i - 1]);
}

nlohmann::json ReplaySource::describe() const {
  nlohmann::json j = {{"type", "replay"}, {"samples", series_.size()}};
  if (!series_.t.empty()) {
    j["t_begin"] = series_.t.front();
    j["t_end"] = series_.t.back();
  }
  return j;
}

std::unique_ptr<FieldSource> DriveSpec::source() const {
  if (double_pulse) return std::make_unique<DoublePulseSource>(pulse);
  return std::make_unique<PumpSource>(pulse);
}

FieldSeries read_field_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string header;
  std::getline(f, header);
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  auto find = [&](const std::string& name) {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw std::runtime_error(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t ct = find("t");
  const std::size_t cp = find("phi");
  FieldSeries s;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() <= std::max(ct, cp)) throw std::runtime_error(path + ": short row");
    s.t.push_back(std::stod(cells[ct]));
    s.phi.push_back(std::stod(cells[cp]));
  }
  return s;
}

void write_field_csv(const FieldSeries& series, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "t,phi\n";
  char line[96];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", series.t[i], series.phi[i]);
    f << line;
  }
}

}  // namespace etapair
