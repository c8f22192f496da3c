#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "etapair/pulses.hpp"

using namespace etapair;

TEST_SUITE("pulses") {
  TEST_CASE("pump shape and timing") {
    const PulseSpec p;  // phi0 0.2, omega 19.1, 54 cycles, 5 + 5 idle
    CHECK(p.period() == doctest::Approx(2.0 * std::numbers::pi / 19.1));
    CHECK(p.end() == doctest::Approx(5.0 + 54.0 * p.period()));
    CHECK(p.t_final() == doctest::Approx(p.end() + 5.0));
    CHECK(pump_phi(p, 0.0) == 0.0);
    CHECK(pump_phi(p, 4.999) == 0.0);
    CHECK(pump_phi(p, p.end() + 1e-9) == 0.0);
    CHECK(std::abs(pump_phi(p, p.end())) < 1e-12);
    // Envelope peaks mid-pulse, where the carrier phase is 27 full cycles
    // plus a quarter period.
    const double peak = p.start() + 27.0 * p.period() + p.period() / 4.0;
    CHECK(pump_phi(p, peak) == doctest::Approx(0.2 * std::pow(std::sin(19.1 * (peak - 5.0) / 108.0), 2)));
    double biggest = 0.0;
    for (double t = 0.0; t < p.t_final(); t += 0.001) biggest = std::max(biggest, std::abs(pump_phi(p, t)));
    CHECK(biggest <= 0.2);
    CHECK(biggest > 0.199);
  }

  TEST_CASE("double pulse repeats the pump after t_f") {
    const PulseSpec p;
    for (double t : {6.0, 10.3, 12.7}) {
      CHECK(double_pulse_phi(p, t) == doctest::Approx(pump_phi(p, t)));
      CHECK(double_pulse_phi(p, t + p.repeat_delay()) == doctest::Approx(pump_phi(p, t)));
    }
    const DriveSpec d{p, true};
    CHECK(d.horizon() == doctest::Approx(2.0 * p.t_final()));
    CHECK(DriveSpec{p, false}.horizon() == doctest::Approx(p.t_final()));
    CHECK_FALSE(d.source()->closed_loop());
  }

  TEST_CASE("pulse parameters are validated") {
    PulseSpec p;
    p.omega = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = PulseSpec{};
    p.cycles = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = PulseSpec{};
    p.idle_after = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS(nlohmann::json({{"omega", 3.0}}).get<PulseSpec>(), std::invalid_argument);
    const auto q = nlohmann::json({{"omega_p", 17.0}, {"phi0", 0.4}}).get<PulseSpec>();
    CHECK(q.omega == 17.0);
    CHECK(q.cycles == 54);
    CHECK(nlohmann::json(q).get<PulseSpec>().phi0 == 0.4);
  }

  TEST_CASE("switch-off factor") {
    CHECK(switch_off_factor(0.9, 1.0, 2.0) == 1.0);
    CHECK(switch_off_factor(1.0, 1.0, 2.0) == 1.0);
    CHECK(switch_off_factor(1.5, 1.0, 2.0) == doctest::Approx(0.5));
    CHECK(switch_off_factor(2.0, 1.0, 2.0) == 0.0);
    CHECK(switch_off_factor(7.0, 1.0, 2.0) == 0.0);
    CHECK_THROWS_AS(switch_off_factor(1.0, 2.0, 2.0), std::invalid_argument);
    FieldSeries s{{0.0, 1.0, 1.5, 3.0}, {1.0, 1.0, 1.0, 1.0}};
    const auto out = switch_off(s, 1.0, 2.0);
    CHECK(out.phi == std::vector<double>{1.0, 1.0, 0.5000000000000001, 0.0});
  }

  TEST_CASE("gaussian smoothing") {
    FieldSeries s;
    for (int k = 0; k <= 400; ++k) {
      s.t.push_back(0.01 * k);
      s.phi.push_back(k < 200 ? 1.0 : -1.0);
    }
    SUBCASE("constant signals are unchanged") {
      FieldSeries c = s;
      std::fill(c.phi.begin(), c.phi.end(), 0.3);
      const auto out = gaussian_smooth(c, 0.1, 1.0, 3.0);
      for (double v : out.phi) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
    }
    SUBCASE("step is softened only inside the window") {
      const auto out = gaussian_smooth(s, 0.1, 1.5, 2.5);
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.t[i] < 1.5 || s.t[i] > 2.5) CHECK(out.phi[i] == s.phi[i]);
      }
      CHECK(std::abs(out.phi[200]) < 0.1);
      CHECK(out.phi[150] == doctest::Approx(1.0));
      CHECK(out.phi[250] == doctest::Approx(-1.0));
      double jump = 0.0;
      for (std::size_t i = 1; i < s.size(); ++i) jump = std::max(jump, std::abs(out.phi[i] - out.phi[i - 1]));
      CHECK(jump < 0.2);
    }
    CHECK_THROWS_AS(gaussian_smooth(s, 0.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_smooth(s, 0.1, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_smooth(s, 0.1, -1.0, 2.0), std::invalid_argument);
  }

  TEST_CASE("replay interpolates and vanishes outside the record") {
    ReplaySource r(FieldSeries{{1.0, 2.0, 4.0}, {0.0, 1.0, -1.0}});
    CHECK(r.value(0.5) == 0.0);
    CHECK(r.value(1.0) == 0.0);
    CHECK(r.value(1.5) == doctest::Approx(0.5));
    CHECK(r.value(2.0) == 1.0);
    CHECK(r.value(3.0) == doctest::Approx(0.0));
    CHECK(r.value(4.0) == -1.0);
    CHECK(r.value(4.1) == 0.0);
    CHECK_THROWS_AS(ReplaySource(FieldSeries{{2.0, 1.0}, {0.0, 0.0}}), std::invalid_argument);
  }

  TEST_CASE("field CSV round trip") {
    const auto path = std::filesystem::temp_directory_path() / "etapair_field_roundtrip.csv";
    FieldSeries s{{0.0, 0.1, 0.2}, {0.125, -1.0 / 3.0, 1e-300}};
    write_field_csv(s, path.string());
    const auto back = read_field_csv(path.string());
    CHECK(back.t == s.t);
    CHECK(back.phi == s.phi);
    std::filesystem::remove(path);
    CHECK_THROWS(read_field_csv(path.string()));
  }
}
