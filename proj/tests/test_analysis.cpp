#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "etapair/analysis.hpp"
#include "etapair/cache.hpp"
#include "etapair/model.hpp"

using namespace etapair;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("etapair_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

FieldSeries sampled(double t0, double t1, double dt, const std::function<double(double)>& f) {
  FieldSeries s;
  const auto n = static_cast<int>(std::round((t1 - t0) / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = t0 + k * dt;
    s.t.push_back(t);
    s.phi.push_back(f(t));
  }
  return s;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("full spectrum is an orthonormal joint eigenbasis of H(0) and eta^2") {
    const auto basis = SectorBasis::build(6, 3, 3);
    const auto family = build_hamiltonian_family(basis, 1.0, 20.0);
    const auto eta = build_eta_operators(basis);
    const auto spec = full_spectrum(family, eta.eta_sq);
    REQUIRE(spec.dim() == basis.dim());
    CHECK(spec.sites == 6);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(family.at(0.0).to_dense());
    CHECK((spec.energies - es.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd h = family.at(0.0).to_dense().real();
    const Eigen::MatrixXd e2 = eta.eta_sq.to_dense().real();
    const Eigen::MatrixXd& v = spec.vectors;
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((h * v - v * spec.energies.asDiagonal()).colwise().norm().maxCoeff() < 1e-9);
    CHECK((e2 * v - v * spec.eta_sq.asDiagonal()).colwise().norm().maxCoeff() < 1e-9);
    for (Eigen::Index m = 0; m < spec.eta_sq.size(); ++m) {
      const double j = (-1.0 + std::sqrt(1.0 + 4.0 * spec.eta_sq(m))) / 2.0;
      CHECK(std::abs(j - std::round(j)) < 1e-8);
    }
    // The fully paired eta state sits at E = L U / 2 with eta^2 = L/2 (L/2 + 1).
    std::size_t top = 0;
    for (Eigen::Index m = 0; m < spec.eta_sq.size(); ++m) {
      if (spec.eta_sq(m) > 11.9) {
        ++top;
        CHECK(spec.energies(m) == doctest::Approx(60.0).epsilon(1e-10));
      }
    }
    CHECK(top == 1);
  }

  TEST_CASE("weights of a normalised state sum to one") {
    const auto basis = SectorBasis::build(4, 2, 2);
    const auto family = build_hamiltonian_family(basis, 1.0, 20.0);
    const auto eta = build_eta_operators(basis);
    const auto spec = full_spectrum(family, eta.eta_sq);
    CVector psi = CVector::Random(static_cast<Eigen::Index>(basis.dim()));
    psi.normalize();
    const auto d = decompose(psi, spec);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-13));
    double level_sum = 0.0;
    std::size_t level_states = 0;
    for (const auto& l : d.levels) {
      level_sum += l.weight;
      level_states += l.states;
    }
    CHECK(level_sum == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(level_states == basis.dim());
    CHECK(d.count_above <= basis.dim());
    CHECK(d.weight_near(0.0, 1e6, 0.0, 1e6, spec) == doctest::Approx(1.0));

    const CVector eigen = spec.vectors.col(3).cast<cplx>();
    const auto pure = decompose(eigen, spec);
    CHECK(pure.count_above == 1);
    CHECK(pure.weights(3) == doctest::Approx(1.0));
    CHECK_THROWS_AS(decompose(CVector::Zero(2), spec), std::invalid_argument);
  }

  TEST_CASE("stft of a pure tone peaks at its frequency") {
    const double period = 2.0 * std::numbers::pi / 19.1;
    const auto s = sampled(0.0, 40.0, period / 50.0, [](double t) { return 0.2 * std::sin(18.3 * t); });
    const auto spec = stft(s, StftConfig::for_period(period));
    for (std::size_t c = 0; c < spec.times.size(); ++c) {
      if (!spec.border[c]) CHECK(spec.ridge()[c] == doctest::Approx(18.3).epsilon(0.05 / 18.3));
    }
    CHECK(*spec.ridge_median(0.0, 40.0) == doctest::Approx(18.3).epsilon(0.05 / 18.3));
    // Peak height of |sum g phi e^{-iwt} dt| is phi0/2 times the window area.
    double peak = 0.0;
    for (std::size_t c = 0; c < spec.times.size(); ++c) {
      if (!spec.border[c]) peak = std::max(peak, spec.magnitude.col(static_cast<Eigen::Index>(c)).maxCoeff());
    }
    const double area = period * std::sqrt(2.0 * std::numbers::pi) * std::erf(2.0 / std::sqrt(2.0));
    CHECK(peak == doctest::Approx(0.1 * area).epsilon(0.01));
  }

  TEST_CASE("stft ridge follows a linear chirp") {
    const double dt = 0.005;
    // Instantaneous angular frequency 14 + 0.2 t.
    const auto s = sampled(0.0, 50.0, dt, [](double t) { return std::sin(14.0 * t + 0.1 * t * t); });
    StftConfig cfg = StftConfig::for_period(2.0 * std::numbers::pi / 19.0);
    const auto spec = stft(s, cfg);
    const auto ridge = spec.ridge();
    for (std::size_t c = 0; c < spec.times.size(); ++c) {
      if (spec.border[c]) continue;
      CHECK(ridge[c] == doctest::Approx(14.0 + 0.2 * spec.times[c]).epsilon(0.1 / 14.0));
    }
  }

  TEST_CASE("stft of silence is zero and bad input is rejected") {
    const auto s = sampled(0.0, 10.0, 0.01, [](double) { return 0.0; });
    const auto spec = stft(s, StftConfig::for_period(0.33));
    CHECK(spec.magnitude.cwiseAbs().maxCoeff() == 0.0);
    CHECK(spec.frequencies.front() == 10.0);
    CHECK(spec.frequencies.back() == doctest::Approx(30.0));
    CHECK(spec.frequencies.size() == 401);

    FieldSeries bad = s;
    bad.t[5] += 0.001;
    CHECK_THROWS_AS(stft(bad, StftConfig::for_period(0.33)), std::invalid_argument);
    CHECK_THROWS_AS(stft(s, StftConfig::for_period(3.0)), std::invalid_argument);
    StftConfig cfg = StftConfig::for_period(0.33);
    cfg.freq_max = 5.0;
    CHECK_THROWS_AS(stft(s, cfg), std::invalid_argument);

    FieldSeries tail = s;
    tail.t.push_back(10.004);
    tail.phi.push_back(0.0);
    CHECK(uniform_part(tail).size() == s.size());
    CHECK_NOTHROW(stft(uniform_part(tail), StftConfig::for_period(0.33)));
  }

  TEST_CASE("border mask marks windows leaving the support") {
    const auto s = sampled(0.0, 20.0, 0.01, [](double t) { return std::sin(20.0 * t); });
    const auto spec = stft(s, StftConfig::for_period(1.0), std::make_pair(5.0, 15.0));
    for (std::size_t c = 0; c < spec.times.size(); ++c) {
      const bool inside = spec.times[c] - 2.0 >= 5.0 && spec.times[c] + 2.0 <= 15.0;
      CHECK(spec.border[c] == !inside);
    }
  }

  TEST_CASE("trajectory summary") {
    Trajectory traj;
    traj.sites = 2;
    CHECK_THROWS_AS(trajectory_summary(traj), std::invalid_argument);
    traj.samples = {{0.0, 0, 0.0, 0, 1, false}, {1.0, 0, 3.0, 0, 1, false}, {2.0, 0, 2.0, 0, 1, true}};
    traj.t_act = 1.5;
    const auto s = trajectory_summary(traj);
    CHECK(s.max_eta_sq_per_site == 1.5);
    CHECK(s.t_of_max == 1.0);
    CHECK(s.final_eta_sq_per_site == 1.0);
    CHECK(s.t_act == 1.5);
  }

  TEST_CASE("cache round trip and stale-file rejection") {
    const auto dir = scratch_dir("cache");
    const CacheKey key{"spectrum", 4, 2, 2, 1.0, 20.0};
    CHECK(key.file_name() == "spectrum_L4_2u2d_t1_U20.bin");
    const auto path = dir / key.file_name();
    CHECK_FALSE(read_cache(path, key).has_value());

    const std::vector<double> payload = {1.0, -2.5, 1e-300, std::numbers::pi};
    write_cache(path, key, payload, {{"note", "x"}});
    const auto blob = read_cache(path, key);
    REQUIRE(blob.has_value());
    CHECK(blob->payload == payload);
    CHECK(blob->header["extra"]["note"] == "x");
    CHECK(blob->header["format_version"] == kCacheFormatVersion);

    CacheKey other = key;
    other.interaction = 10.0;
    CHECK_THROWS_AS(read_cache(path, other), CacheMismatch);
    other = key;
    other.kind = "norms";
    CHECK_THROWS_AS(read_cache(path, other), CacheMismatch);

    std::ofstream(dir / "junk.bin") << "definitely not a cache";
    CHECK_THROWS_AS(read_cache(dir / "junk.bin", key), CacheMismatch);

    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    CHECK_THROWS_AS(read_cache(path, key), CacheMismatch);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("spectrum cache is reused and matches a fresh build") {
    const auto dir = scratch_dir("spectrum");
    const auto model = Model::build(SystemConfig{4, 2, 2, 1.0, 20.0}, dir);
    REQUIRE(model->norm_cache().has_value());
    CHECK(std::filesystem::exists(*model->norm_cache()));
    const auto first = model->spectrum(dir);
    const auto again = model->spectrum(dir);
    CHECK(first.energies == again.energies);
    CHECK(first.vectors == again.vectors);
    const auto fresh = model->spectrum(std::nullopt);
    CHECK((first.energies - fresh.energies).norm() == 0.0);

    const auto reloaded = Model::build(SystemConfig{4, 2, 2, 1.0, 20.0}, dir);
    CHECK(reloaded->q_max() == model->q_max());
    CHECK(reloaded->eta_sq_max() == doctest::Approx(6.0));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("git blob hash") {
    const auto dir = scratch_dir("hash");
    std::ofstream(dir / "hello.txt") << "hello\n";
    CHECK(git_blob_hash(dir / "hello.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
    std::ofstream(dir / "empty.txt");
    CHECK(git_blob_hash(dir / "empty.txt") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    std::filesystem::remove_all(dir);
  }
}
