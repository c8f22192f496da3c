#include "etapair/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

namespace etapair {

LanczosResult lanczos_extremes(const LinearMap& apply, std::size_t dim, double tol, int max_iterations,
                               bool want_lowest_vector, const CVector* start) {
  const auto n = static_cast<Eigen::Index>(dim);
  const int max_m = std::min<int>(max_iterations, static_cast<int>(dim));

  std::mt19937_64 rng(0x5eed1234abcdULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  CVector v(n);
  if (start != nullptr && start->size() == n && start->norm() > 0.0) {
    v = *start;
  } else {
    for (Eigen::Index k = 0; k < n; ++k) v[k] = cplx(uni(rng), 0.0);
  }
  v.normalize();

  std::vector<CVector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;
  basis.push_back(v);

  LanczosResult result;
  CVector w(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;

  for (int j = 0; j < max_m; ++j) {
    apply(basis[j], w);
    const double a = basis[j].dot(w).real();
    alpha.push_back(a);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) w -= q.dot(w) * q;
    }
    const double b = w.norm();

    const int m = j + 1;
    const bool check = (m % 5 == 0) || m == max_m || b < 1e-13;
    if (check) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int k = 0; k < m; ++k) {
        t(k, k) = alpha[k];
        if (k + 1 < m) t(k, k + 1) = t(k + 1, k) = beta[k];
      }
      tri.compute(t);
      const auto& evals = tri.eigenvalues();
      const auto& evecs = tri.eigenvectors();
      result.lowest = evals[0];
      result.highest = evals[m - 1];
      const double res_lo = b * std::abs(evecs(m - 1, 0));
      const double res_hi = b * std::abs(evecs(m - 1, m - 1));
      result.iterations = m;
      const bool done = (res_lo <= tol * std::max(1.0, std::abs(result.lowest)) &&
                         res_hi <= tol * std::max(1.0, std::abs(result.highest))) ||
                        b < 1e-13;
      if (done || m == max_m) {
        result.converged = done;
        if (want_lowest_vector) {
          result.lowest_vector = CVector::Zero(n);
          for (int k = 0; k < m; ++k) result.lowest_vector += evecs(k, 0) * basis[k];
          result.lowest_vector.normalize();
        }
        return result;
      }
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }
  return result;
}

}  // namespace etapair
