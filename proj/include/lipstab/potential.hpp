#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lipstab/geometry.hpp"

namespace lipstab {

struct AffinePiece {
  double a = 0.0;
  Vec A{};

  double operator()(const Vec& x) const { return a + A[0] * x[0] + A[1] * x[1] + A[2] * x[2]; }
};

/// q(x) = sum_j (a_j + A_j . x) chi_{D_j}(x), optionally extended by a constant piece on D_0.
class PiecewiseLinearPotential {
 public:
  PiecewiseLinearPotential() = default;
  PiecewiseLinearPotential(int dim, std::vector<AffinePiece> pieces, double e0_bound);

  int dim() const { return dim_; }
  std::size_t size() const { return pieces_.size(); }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  const AffinePiece& piece(int j) const;  // j = 0 selects the D_0 piece
  double e0_bound() const { return e0_; }
  bool extended() const { return d0_.has_value(); }

  /// Packed as (a_1, A_1, a_2, A_2, ...), dim + 1 numbers per subdomain.
  std::vector<double> coefficients() const;
  static PiecewiseLinearPotential from_coefficients(int dim, std::span<const double> theta, double e0_bound);

  /// max_j (|a_j| + |A_j|).
  double coeff_norm() const;

  PiecewiseLinearPotential with_d0(const AffinePiece& p) const;

  friend PiecewiseLinearPotential operator-(const PiecewiseLinearPotential& l, const PiecewiseLinearPotential& r);

 private:
  int dim_ = 3;
  std::vector<AffinePiece> pieces_;
  std::optional<AffinePiece> d0_;
  double e0_ = 0.0;
};

/// Value at a node of the closed domain. Interface nodes use the lower subdomain index.
double eval(const PiecewiseLinearPotential& q, const GridDomain& domain, std::size_t node);

/// Exact sup over Omega by enumerating subdomain corners.
double sup_norm(const PiecewiseLinearPotential& q, const GridDomain& domain);

/// Copy of q with the constant 1 on D_0.
PiecewiseLinearPotential extend_to_omega0(const PiecewiseLinearPotential& q, const GridDomain& domain);

inline PiecewiseLinearPotential difference(const PiecewiseLinearPotential& l, const PiecewiseLinearPotential& r) {
  return l - r;
}

/// Values on every grid node; nodes where q is undefined get 0.
std::vector<double> sample_nodes(const PiecewiseLinearPotential& q, const GridDomain& domain);

}  // namespace lipstab
