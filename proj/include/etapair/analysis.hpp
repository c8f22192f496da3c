#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "etapair/cache.hpp"
#include "etapair/evolution.hpp"
#include "etapair/pulses.hpp"

namespace etapair {

/// Complete eigenbasis of the field-free Hamiltonian. Inside every degenerate
/// energy block the basis also diagonalises eta^2, so `eta_sq[m]` is an
/// eigenvalue of eta^2 and not just an expectation value.
struct SpectralDecomposition {
  int sites = 0;
  Eigen::VectorXd energies;  // ascending
  Eigen::VectorXd eta_sq;
  Eigen::MatrixXd vectors;   // column m is psi_m (real)

  std::size_t dim() const noexcept { return static_cast<std::size_t>(energies.size()); }
  /// max |energy|, the scale for the degeneracy tolerance.
  double scale() const;
};

/// Relative energy window (times max |energy|) treated as one degenerate level.
inline constexpr double kDegeneracyTolerance = 1e-8;

/// Dense symmetric eigensolve of H(0) followed by the eta^2 rotation inside
/// degenerate blocks. Throws std::runtime_error if LAPACK reports failure.
SpectralDecomposition full_spectrum(const HamiltonianFamily& family, const SparseOperator& eta_sq);

/// Loads the spectrum from `cache_file` if present and matching `key`,
/// otherwise computes and writes it. Propagates CacheMismatch.
SpectralDecomposition load_or_build_spectrum(const HamiltonianFamily& family, const SparseOperator& eta_sq,
                                             const CacheKey& key, const std::filesystem::path& cache_file);

struct LevelWeight {
  double energy = 0.0;
  double eta_sq = 0.0;
  double weight = 0.0;
  std::size_t states = 0;
};

struct Decomposition {
  Eigen::VectorXd weights;
  double threshold = 1e-12;
  std::size_t count_above = 0;
  /// Weight summed over states sharing (energy, eta^2), ascending in energy.
  std::vector<LevelWeight> levels;

  double total() const { return weights.sum(); }
  /// Summed weight of all states with |energy - e| <= e_tol and
  /// |eta^2 - eta| <= eta_tol.
  double weight_near(double energy, double energy_tol, double eta_sq, double eta_tol,
                     const SpectralDecomposition& spectrum) const;
};

/// w_m = |<psi_m|psi>|^2. Throws std::invalid_argument on dimension mismatch.
Decomposition decompose(const CVector& state, const SpectralDecomposition& spectrum, double threshold = 1e-12);

struct StftConfig {
  double sigma = 0.0;        // Gaussian window standard deviation
  double half_width = 2.0;   // window truncated at +-half_width * sigma
  double hop = 0.0;
  double freq_min = 10.0;
  double freq_max = 30.0;
  double freq_step = 0.05;

  /// sigma = T_p, hop = T_p / 2, window 4 T_p wide.
  static StftConfig for_period(double period);
  void validate() const;
};

struct Spectrogram {
  std::vector<double> times;        // window centres
  std::vector<double> frequencies;  // angular frequencies
  Eigen::MatrixXd magnitude;        // rows: frequency, columns: time
  std::vector<bool> border;         // true where the window leaves the support
  nlohmann::json window;

  /// Angular frequency of the maximum magnitude in each column.
  std::vector<double> ridge() const;
  /// Median ridge frequency over non-border windows whose full extent lies in
  /// [t_begin, t_end]. nullopt if there is no such window.
  std::optional<double> ridge_median(double t_begin, double t_end) const;
};

/// Sliding Gaussian-window Fourier magnitude
/// |S(w, t_c)| = |sum_k g(t_k - t_c) phi_k e^{-i w t_k} dt|.
/// `support` bounds the physical signal for the border mask (defaults to the
/// sample range). Throws std::invalid_argument if samples are not uniform or
/// the window is longer than the signal.
Spectrogram stft(const FieldSeries& series, const StftConfig& config,
                 std::optional<std::pair<double, double>> support = std::nullopt);

/// Drops a trailing sample that does not sit on the uniform grid (the
/// shortened last step of an evolution).
FieldSeries uniform_part(const FieldSeries& series);

void write_spectrogram_csv(const Spectrogram& s, const std::string& path);

struct TrajectorySummary {
  double max_eta_sq_per_site = 0.0;
  double final_eta_sq_per_site = 0.0;
  double t_of_max = 0.0;
  std::optional<double> t_act;
};

/// Throws std::invalid_argument for an empty trajectory.
TrajectorySummary trajectory_summary(const Trajectory& traj);

void write_spectrum_csv(const SpectralDecomposition& spectrum, const std::string& path);
void write_weights_csv(const Decomposition& d, const SpectralDecomposition& spectrum, const std::string& path);

}  // namespace etapair
