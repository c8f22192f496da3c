#include <doctest.h>

#include <atomic>
#include <sstream>

#include "etapair/scan.hpp"

using namespace etapair;

namespace {

PulseSpec short_pump() {
  PulseSpec p;
  p.phi0 = 0.3;
  p.omega = 18.0;
  p.cycles = 12;
  p.idle_before = 1.0;
  p.idle_after = 1.0;
  return p;
}

std::string grid_csv(const ScanGrid& g, std::optional<std::size_t> control) {
  std::ostringstream out;
  write_grid_csv(g, control, out);
  return out.str();
}

}  // namespace

TEST_SUITE("scan") {
  TEST_CASE("grid ranges are inclusive and clean") {
    const auto r = GridSpec::range(0.05, 0.60, 0.05);
    REQUIRE(r.size() == 12);
    CHECK(r[2] == 0.15);
    CHECK(r.back() == 0.6);
    const auto s = GridSpec::standard();
    CHECK(s.omegas.size() == 101);
    CHECK(s.phi0s.size() == 12);
    CHECK(s.cells() == 1212);
    CHECK(s.omegas[41] == 19.1);
    CHECK_THROWS_AS(GridSpec::range(1.0, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec::range(0.0, 1.0, 0.0), std::invalid_argument);

    GridSpec g;
    from_json(nlohmann::json{{"omega_p", {17.0, 18.0}}, {"phi0", {{"from", 0.1}, {"to", 0.3}, {"step", 0.1}}}}, g);
    CHECK(g.omegas == std::vector<double>{17.0, 18.0});
    CHECK(g.phi0s == std::vector<double>{0.1, 0.2, 0.3});
    CHECK_THROWS_AS(from_json(nlohmann::json{{"omega", {1.0}}}, g), std::invalid_argument);
  }

  TEST_CASE("engine settings round-trip through JSON") {
    EngineConfig e;
    e.scheme = PropagationScheme::chebyshev;
    e.tolerance = 1e-11;
    const auto back = nlohmann::json(e).get<EngineConfig>();
    CHECK(back.scheme == PropagationScheme::chebyshev);
    CHECK(back.tolerance == 1e-11);
    CHECK_THROWS_AS(nlohmann::json({{"scheme", "euler"}}).get<EngineConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(nlohmann::json({{"dt", 0.1}}).get<EngineConfig>(), std::invalid_argument);
    CHECK_THROWS_AS(nlohmann::json({{"steps_per_period", 20}}).get<EngineConfig>(), std::invalid_argument);
  }

  TEST_CASE("parallel_for visits every index once") {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }

  TEST_CASE("grid output does not depend on the worker count") {
    const auto model = Model::build(SystemConfig{4, 2, 2, 1.0, 20.0});
    const std::vector<ControlSpec> controls = {
        model->control(ControlMode::lyapunov_up, WindowedAverage{}),
        model->control(ControlMode::asymptotic, WindowedAverage{}),
    };
    GridSpec grid{{16.0, 19.0, 22.0}, {0.1, 0.4}};
    const auto one = run_grid(*model, short_pump(), controls, grid, EngineConfig{}, 1);
    const auto three = run_grid(*model, short_pump(), controls, grid, EngineConfig{}, 3);
    CHECK(one.failures() == 0);
    for (std::optional<std::size_t> c : {std::optional<std::size_t>{}, std::optional<std::size_t>{0},
                                         std::optional<std::size_t>{1}}) {
      CHECK(grid_csv(one, c) == grid_csv(three, c));
    }
    const auto csv = grid_csv(one, 0);
    CHECK(csv.rfind("omega_p,phi0,max_eta2_per_L,final_eta2_per_L,controlled_final_eta2_per_L,t_act\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(one.at(1, 0).omega == 19.0);
    CHECK(one.at(1, 0).phi0 == 0.1);
    CHECK(one.best_controlled(0).has_value());
    const double best = *one.best_controlled(0);
    for (const auto& cell : one.cells) CHECK(cell.controlled[0].final_per_site <= best);
  }

  TEST_CASE("failing cells are recorded and the scan carries on") {
    const auto model = Model::build(SystemConfig{4, 2, 2, 1.0, 20.0});
    ControlSpec broken = model->control(ControlMode::lyapunov_up, FixedTime{2.0});
    broken.q_max = 1e-6;  // every control step overshoots the arcsin domain
    GridSpec grid{{18.0}, {0.2, 0.3}};
    const std::vector<ControlSpec> controls = {broken};
    const auto g = run_grid(*model, short_pump(), controls, grid, EngineConfig{}, 2);
    CHECK(g.failures() == 2);
    CHECK_FALSE(g.best_controlled(0).has_value());
    CHECK(grid_csv(g, 0).find("nan") != std::string::npos);
  }

  TEST_CASE("activation sweep") {
    const auto model = Model::build(SystemConfig{4, 2, 2, 1.0, 20.0});
    const DriveSpec drive{short_pump(), false};
    const ControlSpec lc = model->control(ControlMode::lyapunov_up, WindowedAverage{});
    const double t_f = drive.horizon();
    const auto curve = activation_sweep(*model, drive, lc, {2.0, 3.0, 4.0, t_f + 1.0}, EngineConfig{},
                                        SweepDirection::maximize, 2);
    REQUIRE(curve.final_per_site.size() == 4);
    CHECK(curve.final_per_site.back() == curve.uncontrolled_final);
    const auto direct = simulate(*model, drive, model->control(ControlMode::lyapunov_up, FixedTime{3.0}), EngineConfig{});
    CHECK(curve.final_per_site[1] == direct.trajectory.final_eta_per_site());
    CHECK(curve.best_value() >= curve.uncontrolled_final);
    const auto policy = simulate(*model, drive, lc, EngineConfig{});
    CHECK(curve.policy_t_act == policy.trajectory.t_act);
    if (policy.trajectory.t_act) CHECK(curve.policy_final == policy.trajectory.final_eta_per_site());
    CHECK_THROWS_AS(activation_sweep(*model, drive, lc, {}, EngineConfig{}, SweepDirection::maximize),
                    std::invalid_argument);
  }
}
