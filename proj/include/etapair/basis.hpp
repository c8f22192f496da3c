#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace etapair {

using Mask = std::uint32_t;

enum class Spin { up, down };

/// Occupation of both spin species, one bit per site (bit i = site i).
struct Determinant {
  Mask up = 0;
  Mask down = 0;

  friend bool operator==(const Determinant&, const Determinant&) = default;
};

/// Image of a determinant under an elementary operator string, with the
/// fermionic sign picked up along the way.
struct Action {
  Determinant det;
  int sign = 1;
};

/// Layout tag written into on-disk caches. Changing the composite index
/// convention below must change this string.
inline constexpr std::string_view kIndexLayoutTag = "up-major/jw-up-then-down/v1";

/// Fixed-(L, N_up, N_down) determinant basis of a ring of L sites.
///
/// Composite index of a basis state is `up_ordinal * down_dets().size() +
/// down_ordinal`, with both determinant lists sorted ascending by mask value.
///
/// Fermionic ordering: a determinant is
///   c+_{u1,up} c+_{u2,up} ... c+_{d1,dn} c+_{d2,dn} ... |0>
/// with u1 < u2 < ... and d1 < d2 < ..., i.e. all up modes precede all down
/// modes and sites are ordered by index within each species.
class SectorBasis {
 public:
  /// Throws std::invalid_argument("empty sector") for impossible particle
  /// numbers and for site counts outside (0, 16].
  static SectorBasis build(int sites, int n_up, int n_down);

  int sites() const noexcept { return sites_; }
  int n_up() const noexcept { return n_up_; }
  int n_down() const noexcept { return n_down_; }
  std::size_t dim() const noexcept { return up_dets_.size() * down_dets_.size(); }

  std::span<const Mask> up_dets() const noexcept { return up_dets_; }
  std::span<const Mask> down_dets() const noexcept { return down_dets_; }

  std::optional<std::size_t> up_ordinal(Mask m) const;
  std::optional<std::size_t> down_ordinal(Mask m) const;

  Determinant det(std::size_t index) const;
  /// Composite index, or nullopt if the determinant lies outside the sector.
  std::optional<std::size_t> index(const Determinant& d) const;

 private:
  SectorBasis() = default;

  int sites_ = 0;
  int n_up_ = 0;
  int n_down_ = 0;
  std::vector<Mask> up_dets_;
  std::vector<Mask> down_dets_;
  // Dense lookup tables over all 2^L masks; -1 marks masks outside the list.
  std::vector<std::int32_t> up_lookup_;
  std::vector<std::int32_t> down_lookup_;
};

std::uint64_t binomial(int n, int k);

/// c+_{site,spin} acting on `d`; nullopt when the mode is already occupied.
std::optional<Action> apply_creation(Spin spin, int site, const Determinant& d, int sites);
/// c_{site,spin} acting on `d`; nullopt when the mode is empty.
std::optional<Action> apply_annihilation(Spin spin, int site, const Determinant& d, int sites);

enum class Bilinear {
  hop_up,           // c+_{i,up} c_{j,up}
  hop_down,         // c+_{i,dn} c_{j,dn}
  pair_create,      // c+_{i,up} c+_{j,dn}
  pair_annihilate,  // c_{j,dn} c_{i,up}   (adjoint of pair_create)
  density,          // n_{i,up} n_{j,dn}
};

/// Applies the two-mode operator `kind` on sites (i, j) to `d`. Returns the
/// image determinant with its sign, or nullopt when the action vanishes.
std::optional<Action> apply_bilinear(Bilinear kind, int i, int j, const Determinant& d, int sites);

/// Nearest-neighbour bonds (i, i+1 mod L) of the periodic ring. A two-site
/// ring has a single bond.
std::vector<std::pair<int, int>> ring_bonds(int sites);

}  // namespace etapair
