#include "etapair/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <lapacke.h>

namespace etapair {

double SpectralDecomposition::scale() const {
  return energies.size() == 0 ? 0.0 : std::max(std::abs(energies.minCoeff()), std::abs(energies.maxCoeff()));
}

namespace {

Eigen::SparseMatrix<double, Eigen::RowMajor, int> real_part(const SparseOperator& op) {
  return op.matrix().real();
}

}  // namespace

SpectralDecomposition full_spectrum(const HamiltonianFamily& family, const SparseOperator& eta_sq) {
  const auto n = static_cast<Eigen::Index>(family.dim());
  if (static_cast<Eigen::Index>(eta_sq.dim()) != n) throw std::invalid_argument("dimension mismatch");

  SpectralDecomposition out;
  out.sites = family.sites();
  out.vectors = Eigen::MatrixXd::Zero(n, n);
  {
    const SparseOperator h = family.at(0.0);
    const auto& m = h.matrix();
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) out.vectors(it.row(), it.col()) = it.value().real();
    }
  }
  out.energies.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n), out.vectors.data(),
                                         static_cast<lapack_int>(n), out.energies.data());
  if (info != 0) throw std::runtime_error("dsyevd failed with info " + std::to_string(info));

  const auto eta = real_part(eta_sq);
  out.eta_sq.resize(n);
  const double tol = kDegeneracyTolerance * out.scale();
  Eigen::Index begin = 0;
  while (begin < n) {
    Eigen::Index end = begin + 1;
    while (end < n && out.energies[end] - out.energies[end - 1] <= tol) ++end;
    const Eigen::Index k = end - begin;
    auto block = out.vectors.middleCols(begin, k);
    const Eigen::MatrixXd image = eta * block;
    if (k == 1) {
      out.eta_sq[begin] = block.col(0).dot(image.col(0));
    } else {
      Eigen::MatrixXd small = block.transpose() * image;
      small = 0.5 * (small + small.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
      const Eigen::MatrixXd rotated = block * es.eigenvectors();
      block = rotated;
      out.eta_sq.segment(begin, k) = es.eigenvalues();
    }
    begin = end;
  }
  return out;
}

SpectralDecomposition load_or_build_spectrum(const HamiltonianFamily& family, const SparseOperator& eta_sq,
                                             const CacheKey& key, const std::filesystem::path& cache_file) {
  const auto n = static_cast<Eigen::Index>(family.dim());
  if (key.sites != family.sites()) throw std::invalid_argument("spectrum cache key does not match the model");
  if (auto blob = read_cache(cache_file, key)) {
    const auto expected = static_cast<std::size_t>(2 * n + n * n);
    if (blob->payload.size() != expected) throw CacheMismatch("spectrum cache has the wrong size");
    SpectralDecomposition s;
    s.sites = family.sites();
    s.energies = Eigen::Map<const Eigen::VectorXd>(blob->payload.data(), n);
    s.eta_sq = Eigen::Map<const Eigen::VectorXd>(blob->payload.data() + n, n);
    s.vectors = Eigen::Map<const Eigen::MatrixXd>(blob->payload.data() + 2 * n, n, n);
    return s;
  }
  SpectralDecomposition s = full_spectrum(family, eta_sq);
  std::vector<double> payload;
  payload.reserve(static_cast<std::size_t>(2 * n + n * n));
  payload.insert(payload.end(), s.energies.data(), s.energies.data() + n);
  payload.insert(payload.end(), s.eta_sq.data(), s.eta_sq.data() + n);
  payload.insert(payload.end(), s.vectors.data(), s.vectors.data() + n * n);
  write_cache(cache_file, key, payload, {{"dim", n}, {"degeneracy_tolerance", kDegeneracyTolerance}});
  return s;
}

double Decomposition::weight_near(double energy, double energy_tol, double eta, double eta_tol,
                                  const SpectralDecomposition& spectrum) const {
  double w = 0.0;
  for (Eigen::Index m = 0; m < weights.size(); ++m) {
    if (std::abs(spectrum.energies[m] - energy) <= energy_tol && std::abs(spectrum.eta_sq[m] - eta) <= eta_tol) {
      w += weights[m];
    }
  }
  return w;
}

Decomposition decompose(const CVector& state, const SpectralDecomposition& spectrum, double threshold) {
  if (static_cast<std::size_t>(state.size()) != spectrum.dim()) throw std::invalid_argument("dimension mismatch");
  Decomposition d;
  d.threshold = threshold;
  const Eigen::VectorXd re = spectrum.vectors.transpose() * state.real();
  const Eigen::VectorXd im = spectrum.vectors.transpose() * state.imag();
  d.weights = re.cwiseAbs2() + im.cwiseAbs2();
  d.count_above = static_cast<std::size_t>((d.weights.array() >= threshold).count());

  const double tol = kDegeneracyTolerance * spectrum.scale();
  const auto n = d.weights.size();
  Eigen::Index begin = 0;
  while (begin < n) {
    Eigen::Index end = begin + 1;
    while (end < n && spectrum.energies[end] - spectrum.energies[end - 1] <= tol) ++end;
    // Within one energy level, split by eta^2 eigenvalue.
    std::map<long long, LevelWeight> by_eta;
    for (Eigen::Index m = begin; m < end; ++m) {
      auto& level = by_eta[std::llround(spectrum.eta_sq[m] * 1e6)];
      level.energy = spectrum.energies[begin];
      level.eta_sq = spectrum.eta_sq[m];
      level.weight += d.weights[m];
      ++level.states;
    }
    for (auto& [key, level] : by_eta) d.levels.push_back(level);
    begin = end;
  }
  return d;
}

StftConfig StftConfig::for_period(double period) {
  StftConfig c;
  c.sigma = period;
  c.hop = 0.5 * period;
  return c;
}

void StftConfig::validate() const {
  if (!(sigma > 0.0) || !(hop > 0.0) || !(half_width > 0.0)) throw std::invalid_argument("stft: bad window");
  if (!(freq_step > 0.0) || !(freq_max > freq_min)) throw std::invalid_argument("stft: bad frequency grid");
}

FieldSeries uniform_part(const FieldSeries& series) {
  FieldSeries out = series;
  const std::size_t n = out.size();
  if (n >= 3) {
    const double dt = out.t[1] - out.t[0];
    if (std::abs((out.t[n - 1] - out.t[n - 2]) - dt) > 1e-9 * dt) {
      out.t.pop_back();
      out.phi.pop_back();
    }
  }
  return out;
}

Spectrogram stft(const FieldSeries& series, const StftConfig& config,
                 std::optional<std::pair<double, double>> support) {
  config.validate();
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("stft: too few samples");
  const double dt = series.t[1] - series.t[0];
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(series.t[k] - series.t[k - 1] - dt) > 1e-9 * dt) {
      throw std::invalid_argument("stft: samples are not uniformly spaced");
    }
  }
  const double reach = config.half_width * config.sigma;
  const double t0 = series.t.front();
  const double t1 = series.t.back();
  if (2.0 * reach > t1 - t0) throw std::invalid_argument("stft: window longer than signal");
  const auto [s0, s1] = support.value_or(std::make_pair(t0, t1));

  Spectrogram out;
  for (double w = config.freq_min; w <= config.freq_max + 1e-9 * config.freq_step; w += config.freq_step) {
    out.frequencies.push_back(w);
  }
  const std::size_t steps = static_cast<std::size_t>(std::floor((t1 - t0) / config.hop + 1e-9));
  for (std::size_t j = 0; j <= steps; ++j) out.times.push_back(t0 + static_cast<double>(j) * config.hop);

  const auto nf = static_cast<Eigen::Index>(out.frequencies.size());
  const auto nt = static_cast<Eigen::Index>(out.times.size());
  out.magnitude = Eigen::MatrixXd::Zero(nf, nt);
  out.border.resize(out.times.size());
  for (Eigen::Index c = 0; c < nt; ++c) {
    const double tc = out.times[static_cast<std::size_t>(c)];
    out.border[static_cast<std::size_t>(c)] = tc - reach < s0 || tc + reach > s1;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil((tc - reach - t0) / dt - 1e-9)));
    const auto hi = std::min(n - 1, static_cast<std::size_t>(std::floor((tc + reach - t0) / dt + 1e-9)));
    for (Eigen::Index f = 0; f < nf; ++f) {
      const double w = out.frequencies[static_cast<std::size_t>(f)];
      std::complex<double> acc = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) {
        const double x = (series.t[k] - tc) / config.sigma;
        acc += std::exp(-0.5 * x * x) * series.phi[k] * std::polar(1.0, -w * series.t[k]);
      }
      out.magnitude(f, c) = std::abs(acc) * dt;
    }
  }
  out.window = {{"type", "gaussian"},
                {"sigma", config.sigma},
                {"width", 2.0 * reach},
                {"hop", config.hop},
                {"freq_min", config.freq_min},
                {"freq_max", config.freq_max},
                {"freq_step", config.freq_step},
                {"support", {s0, s1}}};
  return out;
}

std::vector<double> Spectrogram::ridge() const {
  std::vector<double> r(times.size());
  for (Eigen::Index c = 0; c < magnitude.cols(); ++c) {
    Eigen::Index f = 0;
    magnitude.col(c).maxCoeff(&f);
    r[static_cast<std::size_t>(c)] = frequencies[static_cast<std::size_t>(f)];
  }
  return r;
}

std::optional<double> Spectrogram::ridge_median(double t_begin, double t_end) const {
  const double reach = window.value("width", 0.0) / 2.0;
  const auto r = ridge();
  std::vector<double> picked;
  for (std::size_t c = 0; c < times.size(); ++c) {
    if (border[c] || times[c] - reach < t_begin || times[c] + reach > t_end) continue;
    picked.push_back(r[c]);
  }
  if (picked.empty()) return std::nullopt;
  const auto mid = picked.begin() + static_cast<std::ptrdiff_t>(picked.size() / 2);
  std::nth_element(picked.begin(), mid, picked.end());
  return *mid;
}

void write_spectrogram_csv(const Spectrogram& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "t,omega,magnitude,border\n";
  char line[128];
  for (std::size_t c = 0; c < s.times.size(); ++c) {
    for (std::size_t r = 0; r < s.frequencies.size(); ++r) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", s.times[c], s.frequencies[r],
                    s.magnitude(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), s.border[c] ? 1 : 0);
      f << line;
    }
  }
}

TrajectorySummary trajectory_summary(const Trajectory& traj) {
  if (traj.samples.empty()) throw std::invalid_argument("empty trajectory");
  TrajectorySummary s;
  const Sample* best = &traj.samples.front();
  for (const auto& x : traj.samples) {
    if (x.eta_sq > best->eta_sq) best = &x;
  }
  s.max_eta_sq_per_site = best->eta_sq / traj.sites;
  s.t_of_max = best->t;
  s.final_eta_sq_per_site = traj.final_eta_per_site();
  s.t_act = traj.t_act;
  return s;
}

void write_spectrum_csv(const SpectralDecomposition& spectrum, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "index,energy,eta2,eta2_per_L\n";
  char line[128];
  for (std::size_t m = 0; m < spectrum.dim(); ++m) {
    const auto i = static_cast<Eigen::Index>(m);
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", m, spectrum.energies[i], spectrum.eta_sq[i],
                  spectrum.eta_sq[i] / spectrum.sites);
    f << line;
  }
}

void write_weights_csv(const Decomposition& d, const SpectralDecomposition& spectrum, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "index,energy,eta2_per_L,weight\n";
  char line[128];
  for (Eigen::Index m = 0; m < d.weights.size(); ++m) {
    if (d.weights[m] < d.threshold) continue;
    std::snprintf(line, sizeof line, "%td,%.17g,%.17g,%.17g\n", m, spectrum.energies[m],
                  spectrum.eta_sq[m] / spectrum.sites, d.weights[m]);
    f << line;
  }
}

}  // namespace etapair
