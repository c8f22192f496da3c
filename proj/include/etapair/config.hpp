#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "etapair/control.hpp"
#include "etapair/model.hpp"
#include "etapair/pulses.hpp"
#include "etapair/scan.hpp"

namespace etapair {

/// Control block as written in a config file. The normalisation constants
/// come from the model, and an activation delay of "auto" means the repeat
/// delay of the drive.
struct ControlConfig {
  ControlMode mode = ControlMode::lyapunov_up;
  std::optional<double> eta0_sq;
  nlohmann::json activation = {{"type", "windowed_average"}};

  ControlSpec resolve(const Model& model, const DriveSpec& drive) const;
};

ActivationPolicy parse_activation(const nlohmann::json& j, const DriveSpec& drive);

struct OutputConfig {
  std::filesystem::path dir = "out";
  int record_every = 1;
  bool weights = false;
  bool stft = false;
};

/// Replayed variants of an evolution: Gaussian smoothing around the
/// activation time (sigma given in pump periods) and cos^2 switch-off
/// intervals given relative to t_f.
struct PostprocessConfig {
  std::vector<double> smooth_sigma_periods;
  double smooth_half_window_periods = 0.5;
  std::vector<std::pair<double, double>> switch_off;
};

struct SweepConfig {
  /// Explicit list, {"from","to","step"} range, or "auto".
  nlohmann::json t_act = "auto";
  SweepDirection direction = SweepDirection::maximize;
  /// Second pass at integration-grid spacing around the coarse optimum.
  bool refine = false;

  std::vector<double> times(const DriveSpec& drive, double horizon) const;
};

struct StftSettings {
  std::optional<std::string> input;
  std::optional<std::string> synthetic;  // "sinusoid" or "chirp"
  double sigma_periods = 1.0;
  double hop_periods = 0.5;
  double freq_min = 10.0;
  double freq_max = 30.0;
  double freq_step = 0.05;

  StftConfig resolve(double period) const;
};

struct RunConfig {
  SystemConfig system;
  DriveSpec drive;
  std::optional<ControlConfig> control;
  EngineConfig engine;
  OutputConfig output;
  std::optional<double> horizon;
  GridSpec grid = GridSpec::standard();
  std::vector<ControlConfig> scan_controls;
  SweepConfig sweep;
  PostprocessConfig postprocess;
  StftSettings stft;
  std::filesystem::path cache_dir = "cache";
  int workers = 1;
  unsigned seed = 0;

  double end_time() const { return horizon.value_or(drive.horizon()); }
};

/// Full validation; unknown keys at any level throw std::invalid_argument.
RunConfig parse_config(const nlohmann::json& j);

/// Names accepted by preset(): fig1b, fig2, fig3, fig4, fig5 (alias fig5b),
/// fig6, fig7.
std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown name.
nlohmann::json preset(const std::string& name);
/// The subcommand a preset is meant for.
std::string preset_command(const std::string& name);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace etapair
