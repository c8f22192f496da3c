#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "etapair/config.hpp"

using namespace etapair;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const auto c = parse_config(json::object());
    CHECK(c.system.sites == 8);
    CHECK(c.system.interaction == 20.0);
    CHECK(c.drive.pulse.omega == 19.1);
    CHECK_FALSE(c.control.has_value());
    CHECK(c.end_time() == doctest::Approx(c.drive.pulse.t_final()));
    CHECK(c.grid.cells() == 1212);
  }

  TEST_CASE("system block") {
    const auto c = parse_config(json{{"system", {{"L", 6}}}});
    CHECK(c.system.n_up == 3);
    CHECK(c.system.n_down == 3);
    CHECK_THROWS_AS(parse_config(json{{"system", {{"L", 7}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"system", {{"L", 8}, {"n_up", 9}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"system", {{"sites", 8}}}}), std::invalid_argument);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    const json bad[] = {
        {{"pulsee", json::object()}},
        {{"pulse", {{"omega", 19.0}}}},
        {{"control", {{"mode", "lyapunov_up"}, {"gain", 2.0}}}},
        {{"control", {{"activation", {{"type", "fixed"}, {"t_act", 3.0}, {"x", 1}}}}}},
        {{"engine", {{"order", 4}}}},
        {{"output", {{"format", "csv"}}}},
        {{"scan", {{"grid", {{"omega_p", {15.0}}, {"theta", {1.0}}}}}}},
        {{"sweep", {{"t_act", "auto"}, {"steps", 3}}}},
        {{"postprocess", {{"smooth", 1}}}},
        {{"stft", {{"window", "hann"}}}},
    };
    for (const auto& j : bad) {
      CAPTURE(j.dump());
      CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
    }
  }

  TEST_CASE("invalid values are rejected") {
    CHECK_THROWS_AS(parse_config(json{{"drive", "triple"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"workers", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"horizon", -1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"control", {{"mode", "pid"}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"control", {{"activation", {{"type", "whenever"}}}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"sweep", {{"direction", "sideways"}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"postprocess", {{"switch_off", {{1.0, 0.0}}}}}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(json{{"stft", {{"synthetic", "noise"}}}}), std::invalid_argument);
  }

  TEST_CASE("every preset parses and names its command") {
    for (const auto& name : preset_names()) {
      CAPTURE(name);
      const RunConfig c = parse_config(preset(name));
      const std::string cmd = preset_command(name);
      CHECK((cmd == "evolve" || cmd == "scan" || cmd == "sweep"));
      if (cmd != "scan") CHECK(c.control.has_value() == (name != "fig1b"));
    }
    CHECK_THROWS_AS(preset("fig9"), std::invalid_argument);
    CHECK_THROWS_AS(preset_command("fig9"), std::invalid_argument);
    CHECK(parse_config(preset("fig5b")).drive.double_pulse);
  }

  TEST_CASE("suppression preset delays activation to the second pump") {
    const RunConfig c = parse_config(preset("fig5"));
    const auto policy = parse_activation(c.control->activation, c.drive);
    REQUIRE(std::holds_alternative<PostDelayPositiveIntegral>(policy));
    CHECK(std::get<PostDelayPositiveIntegral>(policy).delay == doctest::Approx(c.drive.pulse.t_final()));
    const auto times = c.sweep.times(c.drive, c.end_time());
    CHECK(times.front() == doctest::Approx(c.drive.pulse.t_final()));
    CHECK(times.back() <= c.end_time());
    CHECK(c.sweep.direction == SweepDirection::minimize);
  }

  TEST_CASE("automatic sweep starts at the pump onset in quarter periods") {
    const RunConfig c = parse_config(preset("fig4"));
    const auto times = c.sweep.times(c.drive, c.end_time());
    CHECK(times.front() == 5.0);
    CHECK(times[1] - times[0] == doctest::Approx(c.drive.pulse.period() / 4.0));
  }

  TEST_CASE("scan preset carries both controllers") {
    const RunConfig c = parse_config(preset("fig2"));
    REQUIRE(c.scan_controls.size() == 2);
    CHECK(c.scan_controls[0].mode == ControlMode::lyapunov_up);
    CHECK(c.scan_controls[1].mode == ControlMode::asymptotic);
    CHECK(c.scan_controls[1].eta0_sq == 20.0);
  }

  TEST_CASE("config files may contain comments") {
    const auto path = std::filesystem::temp_directory_path() / "etapair_config_comments.json";
    std::ofstream(path) << "{\n  // half filling\n  \"system\": {\"L\": 4}\n}\n";
    CHECK(parse_config(load_json_file(path)).system.sites == 4);
    std::ofstream(path) << "{ \"system\": ";
    CHECK_THROWS_AS(load_json_file(path), std::invalid_argument);
    std::filesystem::remove(path);
    CHECK_THROWS(load_json_file(path));
  }
}
