#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "etapair/basis.hpp"
#include "etapair/sparse_operator.hpp"
#include "etapair/state.hpp"

namespace etapair {

/// Receives (image determinant, coefficient) pairs while an operator rule is
/// applied to one basis determinant.
using Emit = std::function<void(const Determinant&, double)>;
/// Describes a real operator by its action on a single determinant.
using OperatorRule = std::function<void(const Determinant&, const Emit&)>;

/// Matrix of `rule` restricted to `basis`. Images leaving the sector throw.
SparseMatrix assemble(const SectorBasis& basis, const OperatorRule& rule);

/// Direct sum of the sectors (n_up + k, n_down + k) reachable from a base
/// sector by adding or removing on-site pairs. The eta operators and the
/// pair-transfer pieces of Q close on this space.
class PairLadder {
 public:
  static PairLadder build(const SectorBasis& base);

  std::size_t dim() const noexcept { return offsets_.back(); }
  std::size_t blocks() const noexcept { return sectors_.size(); }
  const SectorBasis& sector(std::size_t block) const { return sectors_.at(block); }
  std::size_t offset(std::size_t block) const { return offsets_.at(block); }
  std::size_t base_block() const noexcept { return base_block_; }
  const SectorBasis& base() const { return sectors_.at(base_block_); }

  std::optional<std::size_t> index(const Determinant& d) const;

  /// Diagonal block of `m` belonging to the base sector.
  SparseMatrix restrict_to_base(const SparseMatrix& m) const;

 private:
  std::vector<SectorBasis> sectors_;
  std::vector<std::size_t> offsets_;
  std::size_t base_block_ = 0;
  int base_n_up_ = 0;
  int lowest_shift_ = 0;
};

SparseMatrix assemble(const PairLadder& ladder, const OperatorRule& rule);

/// H(phi) = -t_h (e^{i phi} K + e^{-i phi} K^dagger) + U D on a periodic ring,
/// with K = sum_{i,s} c+_{i,s} c_{i+1,s} and D = sum_i n_{i,up} n_{i,dn}.
///
/// The sparsity pattern of H is fixed at construction; assemble() refreshes
/// only its values, so a new phase costs O(nnz).
class HamiltonianFamily {
 public:
  HamiltonianFamily(const SectorBasis& basis, double hopping, double interaction);

  int sites() const noexcept { return sites_; }
  double hopping() const noexcept { return hopping_; }
  double interaction() const noexcept { return interaction_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(pattern_.rows()); }

  const SparseOperator& forward_hopping() const noexcept { return k_; }
  const SparseOperator& double_occupancy() const noexcept { return d_; }

  /// Fresh H(phi).
  SparseOperator at(double phi) const;

  /// Writes the values of H(phi) into `h`, which must be a copy of pattern().
  void assemble(double phi, SparseMatrix& h) const;
  const SparseMatrix& pattern() const noexcept { return pattern_; }

  /// Bounds [lo, hi] enclosing the spectrum of H(phi) for every real phi.
  std::pair<double, double> spectral_bounds() const noexcept { return bounds_; }

  /// y = H(phi) x without materialising H(phi): two scalar phases applied to
  /// the real hopping lists plus the diagonal.
  void apply(double phi, const CVector& x, CVector& y) const;

 private:
  int sites_;
  double hopping_;
  double interaction_;
  SparseOperator k_;
  SparseOperator d_;
  SparseMatrix pattern_;
  // Per stored entry of pattern_: coefficients of e^{i phi}, e^{-i phi}, 1.
  std::vector<double> forward_coeff_;
  std::vector<double> backward_coeff_;
  std::vector<double> constant_coeff_;
  std::pair<double, double> bounds_;
  // Real compressed rows of K and K^dagger, and the diagonal of U D.
  std::vector<int> k_ptr_, k_col_, kt_ptr_, kt_col_;
  std::vector<double> k_val_, kt_val_;
  Eigen::VectorXd diagonal_;
};

HamiltonianFamily build_hamiltonian_family(const SectorBasis& basis, double hopping, double interaction);

/// SU(2) pairing operators. The ladder-space operators carry the full algebra;
/// `eta_z` and `eta_sq` are their restrictions to the base sector.
struct EtaOperators {
  PairLadder ladder;
  SparseOperator eta_plus;
  SparseOperator eta_minus;
  SparseOperator eta_z_ladder;
  SparseOperator eta_sq_ladder;
  SparseOperator eta_z;
  SparseOperator eta_sq;
};

/// Throws std::invalid_argument for odd L.
EtaOperators build_eta_operators(const SectorBasis& basis);

/// Drift operator Q with d<eta^2>/dt = t_h sin(phi) <Q>, built from its
/// pair-transfer factorisation {A, B} + h.c. on the pair ladder.
SparseOperator build_Q(const SectorBasis& basis);

/// Pair-transfer pieces of Q as ladder operators: A creates a staggered
/// nearest-neighbour singlet, B removes a staggered on-site pair.
struct PairTransfer {
  SparseMatrix create_bond;   // A
  SparseMatrix remove_onsite; // B
};
PairTransfer build_pair_transfer(const PairLadder& ladder);

/// <psi|op|psi>. Throws std::invalid_argument on dimension mismatch.
cplx expectation(const SparseOperator& op, const CVector& psi);
cplx expectation(const SparseOperator& op, const ManyBodyState& state);

/// Fast <psi|A|psi> for a real symmetric A, using its upper triangle only.
class SymmetricForm {
 public:
  SymmetricForm() = default;
  /// Throws std::invalid_argument unless `op` is real symmetric.
  explicit SymmetricForm(const SparseOperator& op);
  std::size_t dim() const noexcept { return diag_.size(); }
  double operator()(const CVector& psi) const;

 private:
  std::vector<double> diag_;
  std::vector<int> ptr_, col_;
  std::vector<double> val_;
};

/// Largest |eigenvalue| of a hermitian operator to relative accuracy 1e-8.
/// Dense for dim <= 1000, Lanczos otherwise. Throws for non-hermitian input.
double max_abs_eigenvalue(const SparseOperator& op);

struct ExtremalEigenvalues {
  double lowest;
  double highest;
};
/// Lanczos with full reorthogonalisation; deterministic start vector.
ExtremalEigenvalues extremal_eigenvalues(const SparseOperator& op, double rel_tol = 1e-10,
                                         int max_iterations = 400);

}  // namespace etapair
