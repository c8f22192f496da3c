#pragma once

// Brute-force reference implementations used only by the tests: dense
// Jordan-Wigner matrices on the full Fock space of small rings, projected
// onto a particle-number sector. They share no code with the library's
// bitmask operators.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "etapair/basis.hpp"

namespace oracle {

using Dense = Eigen::MatrixXcd;
using cplx = std::complex<double>;

// Fock space of 2L modes: mode m < L is (site m, up), mode L + m is
// (site m, down). Basis index bit m = occupation of mode m; the basis state
// is c+_{m1} c+_{m2} ... |0> with m1 < m2 < ...
struct Fock {
  int sites;
  int modes() const { return 2 * sites; }
  int dim() const { return 1 << modes(); }

  // c_m = Z_0 ... Z_{m-1} a_m
  Dense annihilator(int mode) const {
    Dense c = Dense::Zero(dim(), dim());
    for (int s = 0; s < dim(); ++s) {
      if (!(s >> mode & 1)) continue;
      int parity = 0;
      for (int k = 0; k < mode; ++k) parity += s >> k & 1;
      c(s & ~(1 << mode), s) = (parity % 2 == 0) ? 1.0 : -1.0;
    }
    return c;
  }
  Dense creator(int mode) const { return annihilator(mode).adjoint(); }
  Dense number(int mode) const { return creator(mode) * annihilator(mode); }
  int up(int site) const { return site; }
  int down(int site) const { return sites + site; }

  // K = sum_{bonds, spins} c+_i c_j over the ring bonds (i, i+1); a
  // two-site ring has the single bond (0, 1).
  Dense forward_hopping() const {
    Dense k = Dense::Zero(dim(), dim());
    const int bonds = sites == 2 ? 1 : sites;
    for (int i = 0; i < bonds; ++i) {
      const int j = (i + 1) % sites;
      k += creator(up(i)) * annihilator(up(j)) + creator(down(i)) * annihilator(down(j));
    }
    return k;
  }
  Dense double_occupancy() const {
    Dense d = Dense::Zero(dim(), dim());
    for (int i = 0; i < sites; ++i) d += number(up(i)) * number(down(i));
    return d;
  }
  Dense hamiltonian(double phi, double t_h, double u) const {
    const Dense k = forward_hopping();
    const cplx ph = std::polar(1.0, phi);
    return -t_h * (ph * k + std::conj(ph) * k.adjoint()) + u * double_occupancy();
  }

  // eta+ = sum_i (-1)^i c+_{i,dn} c+_{i,up}
  Dense eta_plus() const {
    Dense e = Dense::Zero(dim(), dim());
    for (int i = 0; i < sites; ++i) e += (i % 2 == 0 ? 1.0 : -1.0) * creator(down(i)) * creator(up(i));
    return e;
  }
  Dense eta_z() const {
    Dense z = Dense::Zero(dim(), dim());
    for (int i = 0; i < sites; ++i) z += 0.5 * (number(up(i)) + number(down(i)) - Dense::Identity(dim(), dim()));
    return z;
  }
  Dense eta_sq() const {
    const Dense p = eta_plus();
    const Dense m = p.adjoint();
    const Dense z = eta_z();
    return 0.5 * (p * m + m * p) + z * z;
  }

  // Fock index of a sector determinant.
  int fock_index(const etapair::Determinant& d) const {
    return static_cast<int>(d.up) | static_cast<int>(d.down) << sites;
  }

  // Restriction of a Fock-space matrix to the sector, in sector ordering.
  Dense project(const Dense& m, const etapair::SectorBasis& basis) const {
    const auto n = static_cast<Eigen::Index>(basis.dim());
    Dense out(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        out(r, c) = m(fock_index(basis.det(static_cast<std::size_t>(r))),
                      fock_index(basis.det(static_cast<std::size_t>(c))));
      }
    }
    return out;
  }
};

// H(phi) restricted to one sector, with the phase-independent pieces
// projected once.
struct SectorHamiltonian {
  Dense k;
  Dense d;
  double t_h;
  double u;
  SectorHamiltonian(const Fock& fock, const etapair::SectorBasis& basis, double hopping, double interaction)
      : k(fock.project(fock.forward_hopping(), basis)),
        d(fock.project(fock.double_occupancy(), basis)),
        t_h(hopping),
        u(interaction) {}
  Dense at(double phi) const {
    const cplx ph = std::polar(1.0, phi);
    return -t_h * (ph * k + std::conj(ph) * k.adjoint()) + u * d;
  }
};

// exp(-i H dt) for a hermitian dense H via its eigendecomposition.
inline Dense propagator(const Dense& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Dense> es(h);
  const Eigen::VectorXcd phases =
      es.eigenvalues().unaryExpr([dt](double e) { return std::polar(1.0, -e * dt); });
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline double fidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

}  // namespace oracle
