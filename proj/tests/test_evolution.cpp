#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "etapair/control.hpp"
#include "etapair/model.hpp"
#include "etapair/scan.hpp"
#include "oracle.hpp"

using namespace etapair;

namespace {

const SystemConfig kSmall{4, 2, 2, 1.0, 20.0};

PulseSpec short_pump(double omega = 19.1, double phi0 = 0.3) {
  PulseSpec p;
  p.phi0 = phi0;
  p.omega = omega;
  p.cycles = 20;
  p.idle_before = 1.0;
  p.idle_after = 2.0;
  return p;
}

struct DenseSystem {
  oracle::Fock fock{4};
  SectorBasis basis = SectorBasis::build(4, 2, 2);
  oracle::Dense eta_sq = fock.project(fock.eta_sq(), basis);
  oracle::SectorHamiltonian hamiltonian{fock, basis, 1.0, 20.0};
  oracle::Dense q;
  double q_max = 0.0;
  DenseSystem() {
    const oracle::Dense h = fock.hamiltonian(0.5, 1.0, 20.0);
    const oracle::Dense e2 = fock.eta_sq();
    q = fock.project(oracle::cplx(0.0, 1.0) * (h * e2 - e2 * h) / std::sin(0.5), basis);
    Eigen::SelfAdjointEigenSolver<oracle::Dense> es(q);
    q_max = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  oracle::Dense h(double phi) const { return hamiltonian.at(phi); }
};

// Replays a recorded trajectory with dense propagators, checking every
// recorded phase against the pump or the control law evaluated on the
// replayed state. Returns the replayed final state.
CVector dense_replay(const DenseSystem& sys, const Trajectory& traj, const CVector& initial, const PulseSpec& pump,
                     const std::optional<ControlSpec>& control, double& worst_phi_error) {
  CVector psi = initial;
  worst_phi_error = 0.0;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const Sample& s = traj.samples[k];
    double expected = pump_phi(pump, s.t);
    if (s.control_active) {
      REQUIRE(control.has_value());
      const double q = psi.dot(sys.q * psi).real();
      const double e2 = psi.dot(sys.eta_sq * psi).real();
      CHECK(control->q_max == doctest::Approx(sys.q_max).epsilon(1e-8));
      const double arg = q / sys.q_max;
      switch (control->mode) {
        case ControlMode::lyapunov_up: expected = std::asin(arg); break;
        case ControlMode::lyapunov_down: expected = -std::asin(arg); break;
        case ControlMode::asymptotic:
          expected = -std::asin(arg * (e2 - control->eta0_sq) / control->eta_sq_max);
          break;
      }
    }
    worst_phi_error = std::max(worst_phi_error, std::abs(expected - s.phi));
    if (k + 1 < traj.samples.size()) psi = oracle::propagator(sys.h(s.phi), traj.samples[k + 1].t - s.t) * psi;
  }
  return psi;
}

}  // namespace

TEST_SUITE("evolution") {
  TEST_CASE("time step is a fiftieth of the pump period") {
    CHECK(default_time_step(19.1) == doctest::Approx(2.0 * std::numbers::pi / 19.1 / 50.0));
    CHECK_THROWS(default_time_step(0.0));
    TimeGrid grid{0.0, 0.01};
    CHECK(grid.index_of(0.37) == 37);
    CHECK(grid.index_of(0.0) == 0);
  }

  TEST_CASE("ground state matches dense diagonalisation") {
    const auto model = Model::build(kSmall);
    DenseSystem sys;
    Eigen::SelfAdjointEigenSolver<oracle::Dense> es(sys.h(0.0));
    CHECK(model->ground().energy == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-12));
    CHECK(oracle::fidelity(model->ground().state.amplitudes, es.eigenvectors().col(0)) > 1.0 - 1e-12);
  }

  TEST_CASE("pumped evolution agrees with a dense exponential replay") {
    const auto model = Model::build(kSmall);
    DenseSystem sys;
    const DriveSpec drive{short_pump(), false};
    for (auto scheme : {PropagationScheme::krylov, PropagationScheme::chebyshev}) {
      EngineConfig engine;
      engine.scheme = scheme;
      const auto run = simulate(*model, drive, std::nullopt, engine);
      double phi_err = 0.0;
      const CVector psi = dense_replay(sys, run.trajectory, model->ground().state.amplitudes, drive.pulse,
                                       std::nullopt, phi_err);
      CHECK(phi_err == 0.0);
      CHECK(oracle::fidelity(psi, run.final_state.amplitudes) >= 1.0 - 1e-8);
      CHECK(run.trajectory.final_sample().eta_sq == doctest::Approx(psi.dot(sys.eta_sq * psi).real()).epsilon(1e-7));
    }
  }

  TEST_CASE("closed-loop evolution agrees with a dense replay of the control law") {
    const auto model = Model::build(kSmall);
    DenseSystem sys;
    const DriveSpec drive{short_pump(17.5, 0.4), false};
    const ControlMode modes[] = {ControlMode::lyapunov_up, ControlMode::lyapunov_down, ControlMode::asymptotic};
    for (ControlMode mode : modes) {
      for (ActivationPolicy policy : {ActivationPolicy{FixedTime{4.0}}, ActivationPolicy{WindowedAverage{}}}) {
        CAPTURE(to_string(mode));
        const ControlSpec control = model->control(mode, policy, mode == ControlMode::asymptotic ? 4.0 : 0.0);
        const auto run = simulate(*model, drive, control, EngineConfig{});
        if (std::holds_alternative<FixedTime>(policy)) CHECK(run.trajectory.t_act.has_value());
        double phi_err = 0.0;
        const CVector psi =
            dense_replay(sys, run.trajectory, model->ground().state.amplitudes, drive.pulse, control, phi_err);
        CHECK(phi_err < 1e-8);
        CHECK(oracle::fidelity(psi, run.final_state.amplitudes) >= 1.0 - 1e-8);
      }
    }
  }

  TEST_CASE("Krylov and Chebyshev steps agree at L = 8 and conserve the norm") {
    const auto basis = SectorBasis::build(8, 4, 4);
    const auto family = build_hamiltonian_family(basis, 1.0, 20.0);
    CVector v = CVector::Random(static_cast<Eigen::Index>(basis.dim()));
    v.normalize();
    ManyBodyState a{v, 0.0}, b{v, 0.0};
    const double dt = default_time_step(19.1);
    Propagator kry(family, {dt, PropagationScheme::krylov, 30, 1e-10});
    Propagator che(family, {dt, PropagationScheme::chebyshev, 30, 1e-10});
    for (int k = 0; k < 40; ++k) {
      const double phi = 0.3 * std::sin(0.4 * k);
      kry.step(a, phi, dt);
      che.step(b, phi, dt);
    }
    CHECK(oracle::fidelity(a.amplitudes, b.amplitudes) > 1.0 - 1e-12);
    CHECK(std::abs(a.norm() - 1.0) < 1e-10);
    CHECK(std::abs(b.norm() - 1.0) < 1e-10);
    CHECK(kry.last_order() > 0);
  }

  TEST_CASE("partial last step lands exactly on t_end") {
    const auto model = Model::build(kSmall);
    const DriveSpec drive{short_pump(), false};
    const double t_end = 3.0 + 0.3 * default_time_step(19.1);
    const auto run = simulate(*model, drive, std::nullopt, EngineConfig{}, t_end);
    CHECK(run.trajectory.final_sample().t == t_end);
    CHECK(run.final_state.t == t_end);
  }

  TEST_CASE("record_every thins output but not the dynamics") {
    const auto model = Model::build(kSmall);
    const DriveSpec drive{short_pump(), false};
    EvolveOptions thin;
    thin.record_every = 7;
    const auto a = simulate(*model, drive, std::nullopt, EngineConfig{});
    const auto b = simulate(*model, drive, std::nullopt, EngineConfig{}, std::nullopt, thin);
    CHECK(b.trajectory.samples.size() < a.trajectory.samples.size());
    CHECK(b.trajectory.final_sample().t == a.trajectory.final_sample().t);
    CHECK((a.final_state.amplitudes - b.final_state.amplitudes).norm() == 0.0);
  }

  TEST_CASE("invalid evolutions are rejected") {
    const auto model = Model::build(kSmall);
    const DriveSpec drive{short_pump(), false};
    EvolveOptions opts;
    opts.record_every = 0;
    CHECK_THROWS_AS(simulate(*model, drive, std::nullopt, EngineConfig{}, std::nullopt, opts), std::invalid_argument);
    CHECK_THROWS_AS(simulate(*model, drive, std::nullopt, EngineConfig{}, -1.0), std::invalid_argument);
    PropagatorConfig bad;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("trajectory CSV layout") {
    Trajectory traj;
    traj.sites = 2;
    traj.samples.push_back({0.5, 0.1, 3.0, -0.25, 1.0, true});
    std::ostringstream out;
    write_trajectory_csv(traj, out);
    CHECK(out.str() == "t,phi,eta2_per_L,q_expect,norm,control_active\n0.5,0.10000000000000001,1.5,-0.25,1,1\n");
  }
}
