#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "etapair/cache.hpp"
#include "etapair/commands.hpp"
#include "etapair/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"eta-pairing simulator for the driven 1D Hubbard chain"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::string cache_dir;
  std::optional<int> workers;
  std::optional<unsigned> seed;
  std::optional<double> horizon;

  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset_name, "Named configuration (fig1b, fig2, fig3, fig4, fig5, fig6, fig7)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--cache-dir", cache_dir, "Directory for spectrum and normalisation caches");
  app.add_option("--workers", workers, "Worker threads for scans and sweeps")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for synthetic test signals");
  app.add_option("--extended-horizon", horizon, "Evolve up to this time instead of the drive horizon")
      ->check(CLI::PositiveNumber);

  const char* commands[][2] = {{"spectrum", "Field-free spectrum with eta^2 labels"},
                               {"evolve", "Single evolution (optionally controlled)"},
                               {"scan", "Grid scan over omega_p and Phi_0"},
                               {"sweep", "Final <eta^2>/L versus activation time"},
                               {"stft", "Spectrogram of a field file or synthetic signal"}};
  for (const auto& c : commands) app.add_subcommand(c[0], c[1]);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json merged = nlohmann::json::object();
    if (!preset_name.empty()) {
      if (etapair::preset_command(preset_name) != command) {
        std::cerr << "note: preset '" << preset_name << "' is meant for '" << etapair::preset_command(preset_name)
                  << "'\n";
      }
      merged = etapair::preset(preset_name);
    }
    if (!config_path.empty()) merged.merge_patch(etapair::load_json_file(config_path));
    if (!out_dir.empty()) merged["output"]["dir"] = out_dir;
    if (!cache_dir.empty()) merged["cache_dir"] = cache_dir;
    if (workers) merged["workers"] = *workers;
    if (seed) merged["seed"] = *seed;
    if (horizon) merged["horizon"] = *horizon;

    const etapair::RunConfig config = etapair::parse_config(merged);
    return etapair::run_command(command, config, merged, std::cout);
  } catch (const etapair::CacheMismatch& e) {
    std::cerr << "cache error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
