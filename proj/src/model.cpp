#include "etapair/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace etapair {

void SystemConfig::validate() const {
  if (sites < 2 || sites > 16) throw std::invalid_argument("system: L must lie in [2, 16]");
  if (sites % 2 != 0) throw std::invalid_argument("system: L must be even for the staggered pair operators");
  if (n_up < 0 || n_up > sites || n_down < 0 || n_down > sites) {
    throw std::invalid_argument("system: particle numbers out of range");
  }
  if (!(hopping > 0.0)) throw std::invalid_argument("system: t_h must be positive");
}

CacheKey SystemConfig::cache_key(const std::string& kind) const {
  return {kind, sites, n_up, n_down, hopping, interaction};
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = {{"L", c.sites}, {"n_up", c.n_up}, {"n_down", c.n_down}, {"t_h", c.hopping}, {"U", c.interaction}};
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
  static const char* keys[] = {"L", "n_up", "n_down", "t_h", "U"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw std::invalid_argument("system: unknown key '" + it.key() + "'");
    }
  }
  c.sites = j.value("L", c.sites);
  // Half filling by default when only L is given.
  c.n_up = j.value("n_up", j.contains("L") ? c.sites / 2 : c.n_up);
  c.n_down = j.value("n_down", j.contains("L") ? c.sites / 2 : c.n_down);
  c.hopping = j.value("t_h", c.hopping);
  c.interaction = j.value("U", c.interaction);
}

Model::Model(const SystemConfig& config)
    : config_(config),
      basis_(SectorBasis::build(config.sites, config.n_up, config.n_down)),
      family_(basis_, config.hopping, config.interaction),
      eta_(build_eta_operators(basis_)),
      q_(build_Q(basis_)),
      h0_(family_.at(0.0)),
      ground_(ground_state(family_, basis_)),
      observables_(eta_.eta_sq, q_, &h0_) {}

std::unique_ptr<Model> Model::build(const SystemConfig& config,
                                    const std::optional<std::filesystem::path>& cache_dir) {
  config.validate();
  std::unique_ptr<Model> m(new Model(config));
  if (cache_dir) {
    const CacheKey key = config.cache_key("norms");
    m->norm_cache_ = *cache_dir / key.file_name();
    if (auto blob = read_cache(*m->norm_cache_, key)) {
      if (blob->payload.size() != 2) throw CacheMismatch("normalisation cache has the wrong size");
      m->q_max_ = blob->payload[0];
      m->eta_sq_max_ = blob->payload[1];
      return m;
    }
  }
  m->q_max_ = max_abs_eigenvalue(m->q_);
  m->eta_sq_max_ = max_abs_eigenvalue(m->eta_.eta_sq);
  if (m->norm_cache_) {
    const double values[] = {m->q_max_, m->eta_sq_max_};
    write_cache(*m->norm_cache_, config.cache_key("norms"), values, {{"fields", {"q_max", "eta_sq_max"}}});
  }
  return m;
}

ControlSpec Model::control(ControlMode mode, ActivationPolicy activation, std::optional<double> eta0_sq) const {
  ControlSpec spec;
  spec.mode = mode;
  spec.q_max = q_max_;
  spec.eta_sq_max = eta_sq_max_;
  spec.eta0_sq = eta0_sq.value_or(eta_sq_max_);
  spec.activation = activation;
  spec.validate();
  return spec;
}

SpectralDecomposition Model::spectrum(const std::optional<std::filesystem::path>& cache_dir) const {
  if (!cache_dir) {
    SpectralDecomposition s = full_spectrum(family_, eta_.eta_sq);
    s.sites = config_.sites;
    return s;
  }
  const CacheKey key = config_.cache_key("spectrum");
  return load_or_build_spectrum(family_, eta_.eta_sq, key, *cache_dir / key.file_name());
}

}  // namespace etapair
