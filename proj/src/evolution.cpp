#include "etapair/evolution.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "etapair/lanczos.hpp"

namespace etapair {

void PropagatorConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("propagator tolerance must be positive");
  if (max_subspace < 2) throw std::invalid_argument("Krylov subspace must hold at least two vectors");
}

double default_time_step(double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("pump frequency must be positive");
  return 2.0 * std::numbers::pi / omega / kStepsPerPeriod;
}

Propagator::Propagator(const HamiltonianFamily& family, PropagatorConfig config)
    : family_(&family), config_(config) {
  config_.validate();
  krylov_basis_.resize(static_cast<std::size_t>(config_.max_subspace) + 1);
}

void Propagator::step(ManyBodyState& state, double phi, double dt) {
  if (static_cast<std::size_t>(state.amplitudes.size()) != family_->dim()) {
    throw std::invalid_argument("dimension mismatch");
  }
  if (dt < 0.0) throw std::invalid_argument("negative time step");
  state.t += dt;
  if (dt == 0.0) {
    last_order_ = 0;
    return;
  }
  phase_ = phi;
  if (config_.scheme == PropagationScheme::krylov) {
    krylov(state.amplitudes, dt);
  } else {
    chebyshev(state.amplitudes, dt);
  }
}

void Propagator::krylov(CVector& psi, double dt) {
  const double beta0 = psi.norm();
  if (beta0 == 0.0) return;
  const int max_m = config_.max_subspace;
  const auto n = psi.size();

  krylov_basis_[0] = psi / beta0;
  Eigen::VectorXd alpha(max_m);
  Eigen::VectorXd beta(max_m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  w_.resize(n);

  for (int j = 0; j < max_m; ++j) {
    const CVector& vj = krylov_basis_[static_cast<std::size_t>(j)];
    family_->apply(phase_, vj, w_);
    alpha[j] = vj.dot(w_).real();
    w_ -= alpha[j] * vj;
    if (j > 0) w_ -= beta[j - 1] * krylov_basis_[static_cast<std::size_t>(j - 1)];
    const double b = w_.norm();
    const int m = j + 1;

    Eigen::VectorXd diag = alpha.head(m);
    Eigen::VectorXd sub = beta.head(std::max(m - 1, 0));
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Eigen::MatrixXd& s = tri.eigenvectors();
    const Eigen::VectorXd& theta = tri.eigenvalues();
    // c = exp(-i T dt) e_1
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(m);
    for (int l = 0; l < m; ++l) {
      const cplx phase = std::polar(s(0, l), -theta[l] * dt);
      for (int r = 0; r < m; ++r) c[r] += s(r, l) * phase;
    }
    const double err = b * std::abs(c[m - 1]);
    if (err <= config_.tolerance || b < 1e-14 * std::max(1.0, std::abs(alpha[j]))) {
      psi.setZero();
      for (int r = 0; r < m; ++r) psi += (beta0 * c[r]) * krylov_basis_[static_cast<std::size_t>(r)];
      last_order_ = m;
      return;
    }
    beta[j] = b;
    krylov_basis_[static_cast<std::size_t>(j + 1)] = w_ / b;
  }
  throw std::runtime_error("Krylov propagator: tolerance not reachable with configured subspace size");
}

void Propagator::chebyshev(CVector& psi, double dt) {
  const auto [lo, hi] = family_->spectral_bounds();
  const double centre = 0.5 * (hi + lo);
  const double radius = 0.5 * (hi - lo) * (1.0 + 1e-6) + 1e-12;
  const double x = radius * dt;
  const int max_order = std::max(4 * config_.max_subspace, static_cast<int>(2.0 * x) + 64);

  // Scaled operator Hs = (H - centre) / radius has spectrum inside [-1, 1].
  auto apply_scaled = [&](const CVector& in, CVector& out) {
    family_->apply(phase_, in, out);
    out -= centre * in;
    out /= radius;
  };

  t0_ = psi;
  apply_scaled(t0_, t1_);
  CVector acc = std::cyl_bessel_j(0.0, x) * t0_;
  acc += 2.0 * cplx(0.0, -1.0) * std::cyl_bessel_j(1.0, x) * t1_;
  cplx minus_i_pow(0.0, -1.0);
  int k = 1;
  for (;;) {
    ++k;
    if (k > max_order) throw std::runtime_error("Chebyshev propagator: tolerance not reachable");
    apply_scaled(t1_, t2_);
    t2_ = 2.0 * t2_ - t0_;
    minus_i_pow *= cplx(0.0, -1.0);
    const double jk = std::cyl_bessel_j(static_cast<double>(k), x);
    acc += (2.0 * jk) * minus_i_pow * t2_;
    std::swap(t0_, t1_);
    std::swap(t1_, t2_);
    if (k > x && 2.0 * std::abs(jk) < 1e-2 * config_.tolerance) break;
  }
  psi = std::polar(1.0, -centre * dt) * acc;
  last_order_ = k;
}

ManyBodyState step(const ManyBodyState& state, double phi, double dt, const HamiltonianFamily& family,
                   const PropagatorConfig& config) {
  Propagator p(family, config);
  ManyBodyState out = state;
  p.step(out, phi, dt);
  return out;
}

GroundState ground_state(const HamiltonianFamily& family, const SectorBasis& basis) {
  const SparseOperator h = family.at(0.0);
  if (h.dim() != basis.dim()) throw std::invalid_argument("dimension mismatch");
  auto apply = [&](const CVector& x, CVector& y) { y.noalias() = h.matrix() * x; };

  constexpr int kRestarts = 8;
  CVector guess;
  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    auto r = lanczos_extremes(apply, h.dim(), 1e-13, 300, true, guess.size() ? &guess : nullptr);
    CVector v = r.lowest_vector;
    // Fix the global phase: largest component real and positive.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v[imax]) / std::abs(v[imax]);
    const double e = expectation(h, v).real();
    const double residual = (h.matrix() * v - e * v).norm();
    if (residual <= 1e-9) return {e, ManyBodyState{v, 0.0}};
    guess = v;
  }
  throw std::runtime_error("ground state: Lanczos did not reach residual 1e-9");
}

std::size_t TimeGrid::index_of(double t) const {
  const double x = (t - origin) / dt;
  const double k = std::round(x);
  if (k < 0.0 || std::abs(x - k) > 1e-6) throw std::invalid_argument("time is not on the integration grid");
  return static_cast<std::size_t>(k);
}

EvolveResult evolve_with_state(ManyBodyState initial, FieldSource& source, double t_end, const TimeGrid& grid,
                               Propagator& propagator, const Observables& obs, int sites,
                               const EvolveOptions& options) {
  if (obs.eta_sq.dim() != initial.dim() || obs.q.dim() != initial.dim()) {
    throw std::invalid_argument("observables do not match the state dimension");
  }
  if (options.record_energy && obs.energy == nullptr) throw std::invalid_argument("energy operator not set");
  if (options.record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (!(t_end > initial.t)) throw std::invalid_argument("evolution end must follow its start");

  const std::size_t k0 = grid.index_of(initial.t);
  const double snap = 1e-9 * grid.dt;

  Trajectory traj;
  traj.sites = sites;
  traj.t_final = t_end;
  std::vector<Sample> history;
  const auto expected = static_cast<std::size_t>((t_end - initial.t) / grid.dt) + 2;
  history.reserve(expected);

  ManyBodyState state = std::move(initial);
  state.t = grid.time(k0);
  std::size_t k = k0;
  bool last = false;
  for (;;) {
    const double eta = obs.eta_sq(state.amplitudes);
    const double q = obs.q(state.amplitudes);
    const double norm = state.amplitudes.norm();

    const FieldContext ctx{state.t, k, state, eta, q, std::span<const Sample>(history)};
    const double phi = source.field(ctx);
    const Sample s{state.t, phi, eta, q, norm, source.control_active()};
    history.push_back(s);

    if (last || (k - k0) % static_cast<std::size_t>(options.record_every) == 0) {
      traj.samples.push_back(s);
      if (options.record_energy) traj.energy.push_back(expectation(*obs.energy, state.amplitudes).real());
    }
    if (options.on_sample) options.on_sample(k, state, s);
    if (last) break;

    double t_next = grid.time(k + 1);
    if (t_next >= t_end - snap) {
      t_next = t_end;
      last = true;
    }
    const double t_now = state.t;
    propagator.step(state, phi, t_next - t_now);
    state.t = t_next;
    ++k;
  }

  traj.t_act = source.activation_time();
  traj.metadata = {{"field", source.describe()}, {"t_final", t_end}, {"dt", grid.dt}, {"sites", sites}};
  if (traj.t_act) traj.metadata["t_act"] = *traj.t_act;
  return {std::move(traj), std::move(state)};
}

Trajectory evolve(ManyBodyState initial, FieldSource& source, double t_end, const TimeGrid& grid,
                  Propagator& propagator, const Observables& obs, int sites, const EvolveOptions& options) {
  return evolve_with_state(std::move(initial), source, t_end, grid, propagator, obs, sites, options).trajectory;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t,phi,eta2_per_L,q_expect,norm,control_active\n";
  char line[256];
  for (const auto& s : traj.samples) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", s.t, s.phi, s.eta_sq / traj.sites, s.q,
                  s.norm, s.control_active ? 1 : 0);
    out << line;
  }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_trajectory_csv(traj, f);
}

nlohmann::json trajectory_metadata(const Trajectory& traj) {
  nlohmann::json j = traj.metadata;
  j["columns"] = {"t", "phi", "eta2_per_L", "q_expect", "norm", "control_active"};
  j["samples"] = traj.samples.size();
  if (!traj.samples.empty()) {
    j["final_eta2_per_L"] = traj.final_eta_per_site();
  }
  return j;
}

}  // namespace etapair
