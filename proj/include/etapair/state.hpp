#pragma once

#include "etapair/sparse_operator.hpp"

namespace etapair {

/// Amplitude vector in a SectorBasis together with the time it refers to
/// (in units of 1/t_h).
struct ManyBodyState {
  CVector amplitudes;
  double t = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }
};

}  // namespace etapair
