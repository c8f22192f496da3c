#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include <json.hpp>

#include "etapair/analysis.hpp"
#include "etapair/cache.hpp"
#include "etapair/control.hpp"
#include "etapair/evolution.hpp"
#include "etapair/operators.hpp"

namespace etapair {

struct SystemConfig {
  int sites = 8;
  int n_up = 4;
  int n_down = 4;
  double hopping = 1.0;
  double interaction = 20.0;

  void validate() const;
  CacheKey cache_key(const std::string& kind) const;
};

void to_json(nlohmann::json& j, const SystemConfig& c);
/// Accepts keys L, U, t_h, n_up, n_down; anything else throws.
void from_json(const nlohmann::json& j, SystemConfig& c);

/// Immutable operator set shared by every evolution on one system: basis,
/// H(phi) family, eta operators, Q, their normalisation constants and the
/// ground state. Not copyable, since the family is referenced by pointer
/// from propagators.
class Model {
 public:
  /// With a cache directory, Q_max and eta^2_max are read from (or written
  /// to) it; without one they are recomputed.
  static std::unique_ptr<Model> build(const SystemConfig& config,
                                      const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const SystemConfig& config() const noexcept { return config_; }
  int sites() const noexcept { return config_.sites; }
  const SectorBasis& basis() const noexcept { return basis_; }
  const HamiltonianFamily& family() const noexcept { return family_; }
  const EtaOperators& eta() const noexcept { return eta_; }
  const SparseOperator& q() const noexcept { return q_; }
  const SparseOperator& h0() const noexcept { return h0_; }
  double q_max() const noexcept { return q_max_; }
  double eta_sq_max() const noexcept { return eta_sq_max_; }
  const GroundState& ground() const noexcept { return ground_; }
  const Observables& observables() const noexcept { return observables_; }
  /// Path of the normalisation cache, if one was used.
  const std::optional<std::filesystem::path>& norm_cache() const noexcept { return norm_cache_; }

  ControlSpec control(ControlMode mode, ActivationPolicy activation, std::optional<double> eta0_sq = {}) const;

  /// Field-free spectrum, loaded from or stored in `cache_dir` when given.
  SpectralDecomposition spectrum(const std::optional<std::filesystem::path>& cache_dir) const;

 private:
  explicit Model(const SystemConfig& config);

  SystemConfig config_;
  SectorBasis basis_;
  HamiltonianFamily family_;
  EtaOperators eta_;
  SparseOperator q_;
  SparseOperator h0_;
  double q_max_ = 0.0;
  double eta_sq_max_ = 0.0;
  GroundState ground_;
  Observables observables_;
  std::optional<std::filesystem::path> norm_cache_;
};

}  // namespace etapair
