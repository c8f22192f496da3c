#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace etapair {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor, int>;

/// Square compressed-row complex operator over a fixed basis.
class SparseOperator {
 public:
  /// Entries with magnitude below this are dropped on construction.
  static constexpr double kPruneTolerance = 1e-15;

  SparseOperator() = default;
  SparseOperator(SparseMatrix m, bool hermitian);

  static SparseOperator identity(std::size_t dim);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t nnz() const noexcept { return static_cast<std::size_t>(m_.nonZeros()); }
  bool hermitian() const noexcept { return hermitian_; }
  const SparseMatrix& matrix() const noexcept { return m_; }

  /// y = A x. `y` is resized as needed and must not alias `x`.
  void apply(const CVector& x, CVector& y) const;
  CVector operator*(const CVector& x) const;

  SparseOperator adjoint() const;
  Eigen::MatrixXcd to_dense() const;

  /// Largest elementwise |A_ij - conj(A_ji)|.
  double hermiticity_defect() const;

 private:
  SparseMatrix m_;
  bool hermitian_ = false;
};

/// Frobenius norm of a sparse matrix.
double frobenius_norm(const SparseMatrix& m);

/// Frobenius norm of the commutator [a, b].
double commutator_norm(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace etapair
