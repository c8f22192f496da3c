#include "etapair/basis.hpp"

#include <bit>
#include <iterator>
#include <stdexcept>

namespace etapair {

namespace {

constexpr int kMaxSites = 16;

std::vector<Mask> masks_with_popcount(int sites, int count) {
  std::vector<Mask> out;
  const Mask limit = Mask{1} << sites;
  for (Mask m = 0; m < limit; ++m) {
    if (std::popcount(m) == count) out.push_back(m);
  }
  return out;
}

std::vector<std::int32_t> lookup_table(int sites, const std::vector<Mask>& dets) {
  std::vector<std::int32_t> table(std::size_t{1} << sites, -1);
  for (std::size_t k = 0; k < dets.size(); ++k) table[dets[k]] = static_cast<std::int32_t>(k);
  return table;
}

Mask below(int site) { return (Mask{1} << site) - 1; }

// Number of modes preceding (spin, site) in the fermionic ordering that are
// occupied in `d`.
int modes_before(Spin spin, int site, const Determinant& d) {
  if (spin == Spin::up) return std::popcount(d.up & below(site));
  return std::popcount(d.up) + std::popcount(d.down & below(site));
}

Mask& species(Determinant& d, Spin s) { return s == Spin::up ? d.up : d.down; }

}  // namespace

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

SectorBasis SectorBasis::build(int sites, int n_up, int n_down) {
  if (sites <= 0 || sites > kMaxSites || n_up < 0 || n_up > sites || n_down < 0 || n_down > sites) {
    throw std::invalid_argument("empty sector");
  }
  SectorBasis b;
  b.sites_ = sites;
  b.n_up_ = n_up;
  b.n_down_ = n_down;
  b.up_dets_ = masks_with_popcount(sites, n_up);
  b.down_dets_ = masks_with_popcount(sites, n_down);
  b.up_lookup_ = lookup_table(sites, b.up_dets_);
  b.down_lookup_ = lookup_table(sites, b.down_dets_);
  return b;
}

std::optional<std::size_t> SectorBasis::up_ordinal(Mask m) const {
  if (m >= up_lookup_.size() || up_lookup_[m] < 0) return std::nullopt;
  return static_cast<std::size_t>(up_lookup_[m]);
}

std::optional<std::size_t> SectorBasis::down_ordinal(Mask m) const {
  if (m >= down_lookup_.size() || down_lookup_[m] < 0) return std::nullopt;
  return static_cast<std::size_t>(down_lookup_[m]);
}

Determinant SectorBasis::det(std::size_t index) const {
  const std::size_t n_dn = down_dets_.size();
  return {up_dets_.at(index / n_dn), down_dets_.at(index % n_dn)};
}

std::optional<std::size_t> SectorBasis::index(const Determinant& d) const {
  auto u = up_ordinal(d.up);
  auto v = down_ordinal(d.down);
  if (!u || !v) return std::nullopt;
  return *u * down_dets_.size() + *v;
}

std::optional<Action> apply_creation(Spin spin, int site, const Determinant& d, int sites) {
  if (site < 0 || site >= sites) throw std::out_of_range("site index");
  const Mask bit = Mask{1} << site;
  Determinant out = d;
  Mask& m = species(out, spin);
  if (m & bit) return std::nullopt;
  const int sign = (modes_before(spin, site, d) % 2 == 0) ? 1 : -1;
  m |= bit;
  return Action{out, sign};
}

std::optional<Action> apply_annihilation(Spin spin, int site, const Determinant& d, int sites) {
  if (site < 0 || site >= sites) throw std::out_of_range("site index");
  const Mask bit = Mask{1} << site;
  Determinant out = d;
  Mask& m = species(out, spin);
  if (!(m & bit)) return std::nullopt;
  const int sign = (modes_before(spin, site, d) % 2 == 0) ? 1 : -1;
  m &= ~bit;
  return Action{out, sign};
}

namespace {

struct Elementary {
  bool create;
  Spin spin;
  int site;
};

// Applies `ops` right to left (ops.back() acts first).
std::optional<Action> apply_string(std::initializer_list<Elementary> ops, const Determinant& d, int sites) {
  Action acc{d, 1};
  for (auto it = std::rbegin(ops); it != std::rend(ops); ++it) {
    auto r = it->create ? apply_creation(it->spin, it->site, acc.det, sites)
                        : apply_annihilation(it->spin, it->site, acc.det, sites);
    if (!r) return std::nullopt;
    acc.det = r->det;
    acc.sign *= r->sign;
  }
  return acc;
}

}  // namespace

std::optional<Action> apply_bilinear(Bilinear kind, int i, int j, const Determinant& d, int sites) {
  switch (kind) {
    case Bilinear::hop_up:
      return apply_string({{true, Spin::up, i}, {false, Spin::up, j}}, d, sites);
    case Bilinear::hop_down:
      return apply_string({{true, Spin::down, i}, {false, Spin::down, j}}, d, sites);
    case Bilinear::pair_create:
      return apply_string({{true, Spin::up, i}, {true, Spin::down, j}}, d, sites);
    case Bilinear::pair_annihilate:
      return apply_string({{false, Spin::down, j}, {false, Spin::up, i}}, d, sites);
    case Bilinear::density: {
      if (i < 0 || i >= sites || j < 0 || j >= sites) throw std::out_of_range("site index");
      const bool occupied = (d.up >> i & 1u) && (d.down >> j & 1u);
      if (!occupied) return std::nullopt;
      return Action{d, 1};
    }
  }
  return std::nullopt;
}

std::vector<std::pair<int, int>> ring_bonds(int sites) {
  std::vector<std::pair<int, int>> bonds;
  if (sites < 2) return bonds;
  if (sites == 2) return {{0, 1}};
  for (int i = 0; i < sites; ++i) bonds.emplace_back(i, (i + 1) % sites);
  return bonds;
}

}  // namespace etapair
