#include "etapair/operators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "etapair/lanczos.hpp"

namespace etapair {

namespace {

using Triplet = Eigen::Triplet<cplx>;

int stagger(int site) { return (site % 2 == 0) ? 1 : -1; }

void require_even_ring(int sites) {
  if (sites % 2 != 0) throw std::invalid_argument("staggered operator ill-defined on odd periodic ring");
}

// Emits coeff * sign * image for a non-vanishing bilinear action.
void emit_bilinear(Bilinear kind, int i, int j, const Determinant& d, int sites, double coeff, const Emit& emit) {
  if (auto a = apply_bilinear(kind, i, j, d, sites)) emit(a->det, coeff * a->sign);
}

}  // namespace

SparseMatrix assemble(const SectorBasis& basis, const OperatorRule& rule) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  std::vector<Triplet> triplets;
  for (std::size_t col = 0; col < basis.dim(); ++col) {
    rule(basis.det(col), [&](const Determinant& image, double coeff) {
      auto row = basis.index(image);
      if (!row) throw std::logic_error("operator leaves the sector");
      triplets.emplace_back(static_cast<int>(*row), static_cast<int>(col), cplx(coeff, 0.0));
    });
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune([](const int&, const int&, const cplx& v) { return std::abs(v) > SparseOperator::kPruneTolerance; });
  m.makeCompressed();
  return m;
}

PairLadder PairLadder::build(const SectorBasis& base) {
  const int sites = base.sites();
  const int lo = -std::min(base.n_up(), base.n_down());
  const int hi = std::min(sites - base.n_up(), sites - base.n_down());
  PairLadder ladder;
  ladder.base_n_up_ = base.n_up();
  ladder.lowest_shift_ = lo;
  ladder.offsets_.push_back(0);
  for (int k = lo; k <= hi; ++k) {
    if (k == 0) ladder.base_block_ = ladder.sectors_.size();
    ladder.sectors_.push_back(SectorBasis::build(sites, base.n_up() + k, base.n_down() + k));
    ladder.offsets_.push_back(ladder.offsets_.back() + ladder.sectors_.back().dim());
  }
  return ladder;
}

std::optional<std::size_t> PairLadder::index(const Determinant& d) const {
  const int shift = std::popcount(d.up) - base_n_up_;
  const int block = shift - lowest_shift_;
  if (block < 0 || block >= static_cast<int>(sectors_.size())) return std::nullopt;
  auto local = sectors_[static_cast<std::size_t>(block)].index(d);
  if (!local) return std::nullopt;
  return offsets_[static_cast<std::size_t>(block)] + *local;
}

SparseMatrix PairLadder::restrict_to_base(const SparseMatrix& m) const {
  const auto start = static_cast<Eigen::Index>(offsets_[base_block_]);
  const auto size = static_cast<Eigen::Index>(sectors_[base_block_].dim());
  SparseMatrix block = m.block(start, start, size, size);
  block.makeCompressed();
  return block;
}

SparseMatrix assemble(const PairLadder& ladder, const OperatorRule& rule) {
  const auto n = static_cast<Eigen::Index>(ladder.dim());
  std::vector<Triplet> triplets;
  for (std::size_t b = 0; b < ladder.blocks(); ++b) {
    const SectorBasis& sector = ladder.sector(b);
    for (std::size_t local = 0; local < sector.dim(); ++local) {
      const std::size_t col = ladder.offset(b) + local;
      rule(sector.det(local), [&](const Determinant& image, double coeff) {
        auto row = ladder.index(image);
        if (!row) throw std::logic_error("operator leaves the pair ladder");
        triplets.emplace_back(static_cast<int>(*row), static_cast<int>(col), cplx(coeff, 0.0));
      });
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune([](const int&, const int&, const cplx& v) { return std::abs(v) > SparseOperator::kPruneTolerance; });
  m.makeCompressed();
  return m;
}

HamiltonianFamily::HamiltonianFamily(const SectorBasis& basis, double hopping, double interaction)
    : sites_(basis.sites()), hopping_(hopping), interaction_(interaction) {
  const int sites = sites_;
  const auto bonds = ring_bonds(sites);

  k_ = SparseOperator(etapair::assemble(basis,
                               [&](const Determinant& d, const Emit& emit) {
                                 for (auto [i, j] : bonds) {
                                   emit_bilinear(Bilinear::hop_up, i, j, d, sites, 1.0, emit);
                                   emit_bilinear(Bilinear::hop_down, i, j, d, sites, 1.0, emit);
                                 }
                               }),
                      false);
  d_ = SparseOperator(etapair::assemble(basis,
                               [&](const Determinant& d, const Emit& emit) {
                                 const int doublons = std::popcount(d.up & d.down);
                                 if (doublons > 0) emit(d, static_cast<double>(doublons));
                               }),
                      true);

  const SparseMatrix& k = k_.matrix();
  const SparseMatrix kt = k.adjoint();
  const SparseMatrix& dm = d_.matrix();

  // Structural union of K, K^dagger and D; values are irrelevant here.
  Eigen::SparseMatrix<double, Eigen::RowMajor, int> abs_sum = k.cwiseAbs() + kt.cwiseAbs() + dm.cwiseAbs();
  pattern_ = abs_sum.cast<cplx>();
  pattern_.makeCompressed();

  const auto nnz = static_cast<std::size_t>(pattern_.nonZeros());
  forward_coeff_.assign(nnz, 0.0);
  backward_coeff_.assign(nnz, 0.0);
  constant_coeff_.assign(nnz, 0.0);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t slot = 0;
  for (int row = 0; row < pattern_.outerSize(); ++row) {
    double centre = 0.0;
    double radius = 0.0;
    for (SparseMatrix::InnerIterator it(pattern_, row); it; ++it, ++slot) {
      const int col = static_cast<int>(it.col());
      forward_coeff_[slot] = k.coeff(row, col).real();
      backward_coeff_[slot] = kt.coeff(row, col).real();
      constant_coeff_[slot] = dm.coeff(row, col).real();
      if (col == row) {
        centre += interaction_ * constant_coeff_[slot];
        radius += std::abs(hopping_) * (std::abs(forward_coeff_[slot]) + std::abs(backward_coeff_[slot]));
      } else {
        radius += std::abs(hopping_) * (std::abs(forward_coeff_[slot]) + std::abs(backward_coeff_[slot]));
      }
    }
    lo = std::min(lo, centre - radius);
    hi = std::max(hi, centre + radius);
  }
  bounds_ = {lo, hi};

  auto to_real_rows = [](const SparseMatrix& m, std::vector<int>& ptr, std::vector<int>& col, std::vector<double>& val) {
    ptr.assign(1, 0);
    for (int row = 0; row < m.outerSize(); ++row) {
      for (SparseMatrix::InnerIterator it(m, row); it; ++it) {
        col.push_back(static_cast<int>(it.col()));
        val.push_back(it.value().real());
      }
      ptr.push_back(static_cast<int>(col.size()));
    }
  };
  to_real_rows(k, k_ptr_, k_col_, k_val_);
  to_real_rows(kt, kt_ptr_, kt_col_, kt_val_);
  diagonal_ = interaction_ * Eigen::VectorXd(dm.diagonal().real());
}

void HamiltonianFamily::apply(double phi, const CVector& x, CVector& y) const {
  const auto n = static_cast<Eigen::Index>(diagonal_.size());
  if (x.size() != n) throw std::invalid_argument("dimension mismatch");
  y.resize(n);
  const cplx fwd = -hopping_ * std::polar(1.0, phi);
  const cplx bwd = -hopping_ * std::polar(1.0, -phi);
  const cplx* xs = x.data();
  cplx* ys = y.data();
  for (Eigen::Index r = 0; r < n; ++r) {
    double fr = 0.0, fi = 0.0, br = 0.0, bi = 0.0;
    for (int p = k_ptr_[r]; p < k_ptr_[r + 1]; ++p) {
      const cplx v = xs[k_col_[p]];
      fr += k_val_[p] * v.real();
      fi += k_val_[p] * v.imag();
    }
    for (int p = kt_ptr_[r]; p < kt_ptr_[r + 1]; ++p) {
      const cplx v = xs[kt_col_[p]];
      br += kt_val_[p] * v.real();
      bi += kt_val_[p] * v.imag();
    }
    ys[r] = diagonal_[r] * xs[r] + fwd * cplx(fr, fi) + bwd * cplx(br, bi);
  }
}

void HamiltonianFamily::assemble(double phi, SparseMatrix& h) const {
  if (h.nonZeros() != pattern_.nonZeros()) throw std::invalid_argument("matrix does not share the Hamiltonian pattern");
  const cplx fwd = -hopping_ * std::polar(1.0, phi);
  const cplx bwd = -hopping_ * std::polar(1.0, -phi);
  cplx* values = h.valuePtr();
  const std::size_t nnz = forward_coeff_.size();
  for (std::size_t s = 0; s < nnz; ++s) {
    values[s] = fwd * forward_coeff_[s] + bwd * backward_coeff_[s] + interaction_ * constant_coeff_[s];
  }
}

SparseOperator HamiltonianFamily::at(double phi) const {
  SparseMatrix h = pattern_;
  assemble(phi, h);
  return {std::move(h), true};
}

HamiltonianFamily build_hamiltonian_family(const SectorBasis& basis, double hopping, double interaction) {
  return {basis, hopping, interaction};
}

EtaOperators build_eta_operators(const SectorBasis& basis) {
  const int sites = basis.sites();
  require_even_ring(sites);
  PairLadder ladder = PairLadder::build(basis);

  // eta+_i = c+_{i,dn} c+_{i,up} = -c+_{i,up} c+_{i,dn}
  SparseMatrix plus = assemble(ladder, [&](const Determinant& d, const Emit& emit) {
    for (int i = 0; i < sites; ++i) emit_bilinear(Bilinear::pair_create, i, i, d, sites, -stagger(i), emit);
  });
  SparseMatrix minus = plus.adjoint();
  SparseMatrix z = assemble(ladder, [&](const Determinant& d, const Emit& emit) {
    const int particles = std::popcount(d.up) + std::popcount(d.down);
    const double value = 0.5 * (particles - sites);
    if (value != 0.0) emit(d, value);
  });
  SparseMatrix pm = plus * minus;
  SparseMatrix mp = minus * plus;
  SparseMatrix zz = z * z;
  SparseMatrix sq = 0.5 * (pm + mp) + zz;

  SparseMatrix z_base = ladder.restrict_to_base(z);
  SparseMatrix sq_base = ladder.restrict_to_base(sq);
  return EtaOperators{std::move(ladder),
                      SparseOperator(std::move(plus), false),
                      SparseOperator(std::move(minus), false),
                      SparseOperator(std::move(z), true),
                      SparseOperator(std::move(sq), true),
                      SparseOperator(std::move(z_base), true),
                      SparseOperator(std::move(sq_base), true)};
}

PairTransfer build_pair_transfer(const PairLadder& ladder) {
  const int sites = ladder.base().sites();
  require_even_ring(sites);
  const auto bonds = ring_bonds(sites);
  // A = sum_i (-1)^i (c+_{i,up} c+_{i+1,dn} - c+_{i,dn} c+_{i+1,up})
  //   = sum_i (-1)^i (pair_create(i, i+1) + pair_create(i+1, i))
  SparseMatrix a = assemble(ladder, [&](const Determinant& d, const Emit& emit) {
    for (auto [i, j] : bonds) {
      emit_bilinear(Bilinear::pair_create, i, j, d, sites, stagger(i), emit);
      emit_bilinear(Bilinear::pair_create, j, i, d, sites, stagger(i), emit);
    }
  });
  // B = sum_j (-1)^j c_{j,up} c_{j,dn} = -sum_j (-1)^j pair_annihilate(j, j)
  SparseMatrix b = assemble(ladder, [&](const Determinant& d, const Emit& emit) {
    for (int j = 0; j < sites; ++j) emit_bilinear(Bilinear::pair_annihilate, j, j, d, sites, -stagger(j), emit);
  });
  return {std::move(a), std::move(b)};
}

SparseOperator build_Q(const SectorBasis& basis) {
  require_even_ring(basis.sites());
  const PairLadder ladder = PairLadder::build(basis);
  const PairTransfer pieces = build_pair_transfer(ladder);
  SparseMatrix ab = pieces.create_bond * pieces.remove_onsite;
  SparseMatrix ba = pieces.remove_onsite * pieces.create_bond;
  SparseMatrix anti = ab + ba;
  SparseMatrix anti_h = anti.adjoint();
  SparseMatrix q = anti + anti_h;
  return {ladder.restrict_to_base(q), true};
}

cplx expectation(const SparseOperator& op, const CVector& psi) {
  if (static_cast<std::size_t>(psi.size()) != op.dim()) throw std::invalid_argument("dimension mismatch");
  return psi.dot(op.matrix() * psi);
}

cplx expectation(const SparseOperator& op, const ManyBodyState& state) { return expectation(op, state.amplitudes); }

SymmetricForm::SymmetricForm(const SparseOperator& op) {
  const SparseMatrix& m = op.matrix();
  const auto n = static_cast<std::size_t>(m.rows());
  diag_.assign(n, 0.0);
  ptr_.assign(1, 0);
  for (int row = 0; row < m.outerSize(); ++row) {
    for (SparseMatrix::InnerIterator it(m, row); it; ++it) {
      const cplx v = it.value();
      const auto c = static_cast<int>(it.col());
      if (v.imag() != 0.0 || std::abs(m.coeff(c, row) - v) > 1e-14) {
        throw std::invalid_argument("SymmetricForm needs a real symmetric operator");
      }
      if (c == row) {
        diag_[static_cast<std::size_t>(row)] = v.real();
      } else if (c > row) {
        col_.push_back(c);
        val_.push_back(v.real());
      }
    }
    ptr_.push_back(static_cast<int>(col_.size()));
  }
}

double SymmetricForm::operator()(const CVector& psi) const {
  if (static_cast<std::size_t>(psi.size()) != diag_.size()) throw std::invalid_argument("dimension mismatch");
  const cplx* x = psi.data();
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t r = 0; r < diag_.size(); ++r) {
    const double xr = x[r].real();
    const double xi = x[r].imag();
    diag += diag_[r] * (xr * xr + xi * xi);
    double sr = 0.0, si = 0.0;
    for (int p = ptr_[r]; p < ptr_[r + 1]; ++p) {
      const cplx v = x[col_[p]];
      sr += val_[p] * v.real();
      si += val_[p] * v.imag();
    }
    // Re(conj(x_r) * s)
    off += xr * sr + xi * si;
  }
  return diag + 2.0 * off;
}

ExtremalEigenvalues extremal_eigenvalues(const SparseOperator& op, double rel_tol, int max_iterations) {
  if (!op.hermitian()) throw std::invalid_argument("extremal eigenvalues need a hermitian operator");
  auto r = lanczos_extremes([&](const CVector& x, CVector& y) { y.noalias() = op.matrix() * x; }, op.dim(), rel_tol,
                            max_iterations, false);
  if (!r.converged) throw std::runtime_error("Lanczos did not converge");
  return {r.lowest, r.highest};
}

double max_abs_eigenvalue(const SparseOperator& op) {
  if (!op.hermitian()) throw std::invalid_argument("max_abs_eigenvalue needs a hermitian operator");
  if (op.dim() == 0) return 0.0;
  if (op.dim() <= 1000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op.to_dense(), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  }
  const auto e = extremal_eigenvalues(op, 1e-10, 600);
  return std::max(std::abs(e.lowest), std::abs(e.highest));
}

}  // namespace etapair
