#include "etapair/sparse_operator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etapair {

SparseOperator::SparseOperator(SparseMatrix m, bool hermitian) : m_(std::move(m)), hermitian_(hermitian) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("SparseOperator must be square");
  m_.prune([](const int&, const int&, const cplx& v) { return std::abs(v) > kPruneTolerance; });
  m_.makeCompressed();
}

SparseOperator SparseOperator::identity(std::size_t dim) {
  SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setIdentity();
  return {std::move(m), true};
}

void SparseOperator::apply(const CVector& x, CVector& y) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw std::invalid_argument("dimension mismatch");
  y.noalias() = m_ * x;
}

CVector SparseOperator::operator*(const CVector& x) const {
  CVector y;
  apply(x, y);
  return y;
}

SparseOperator SparseOperator::adjoint() const {
  SparseMatrix a = m_.adjoint();
  return {std::move(a), hermitian_};
}

Eigen::MatrixXcd SparseOperator::to_dense() const { return Eigen::MatrixXcd(m_); }

double SparseOperator::hermiticity_defect() const {
  SparseMatrix diff = m_ - SparseMatrix(m_.adjoint());
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

double frobenius_norm(const SparseMatrix& m) { return m.norm(); }

double commutator_norm(const SparseMatrix& a, const SparseMatrix& b) {
  SparseMatrix ab = a * b;
  SparseMatrix ba = b * a;
  return frobenius_norm(ab - ba);
}

}  // namespace etapair
