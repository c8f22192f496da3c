#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "etapair/config.hpp"

namespace etapair {

struct CommandOutput {
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::filesystem::path> files;
  std::vector<std::filesystem::path> caches;
  bool partial = false;
};

/// Field-free spectrum: spectrum.csv (index, energy, eta2, eta2_per_L).
CommandOutput cmd_spectrum(const RunConfig& config);
/// One evolution: trajectory.csv, field.csv, optional weights.csv and
/// spectrogram, plus replayed smoothing / switch-off variants.
CommandOutput cmd_evolve(const RunConfig& config);
/// Grid scan: grid.csv (first control) plus one grid file per further
/// control and (phi0 x omega_p) matrices of each column.
CommandOutput cmd_scan(const RunConfig& config, const ProgressFn& progress = {});
/// Activation-time sweep: sweep.csv plus reference values in the summary.
CommandOutput cmd_sweep(const RunConfig& config);
/// Spectrogram of a field file or of a synthetic test signal.
CommandOutput cmd_stft(const RunConfig& config);

/// Runs `command`, then writes manifest.json (config echo, cache hashes,
/// wall time, outputs, summary) into the output directory. Returns the
/// process exit status: 0 on success, 3 for a grid with failed cells.
int run_command(const std::string& command, const RunConfig& config, const nlohmann::json& config_echo,
                std::ostream& log);

}  // namespace etapair
