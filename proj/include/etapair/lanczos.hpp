#pragma once

#include <cstddef>
#include <functional>

#include "etapair/sparse_operator.hpp"

namespace etapair {

using LinearMap = std::function<void(const CVector& x, CVector& y)>;

struct LanczosResult {
  double lowest = 0.0;
  double highest = 0.0;
  CVector lowest_vector;  // empty unless requested
  int iterations = 0;
  bool converged = false;
};

/// Extremal eigenvalues of a hermitian map by Lanczos with full
/// reorthogonalisation. Converged when both extreme Ritz residual estimates
/// fall below `tol * max(1, |theta|)`. The start vector is a fixed
/// pseudo-random vector, so results are reproducible.
LanczosResult lanczos_extremes(const LinearMap& apply, std::size_t dim, double tol, int max_iterations,
                               bool want_lowest_vector, const CVector* start = nullptr);

}  // namespace etapair
