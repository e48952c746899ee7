#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lipstab/pde.hpp"
#include "lipstab/potential.hpp"

namespace lipstab {

/// Ordering of surface eigenpairs that share an eigenvalue.
enum class TieOrder { lexicographic, reversed };

/// Discrete H^{1/2}_00(Sigma) / H^{-1/2} structure on the Sigma nodes.
///
/// lap_b is the 5-point (3-point in 2-D) grid Laplacian on the Sigma rectangle with
/// zero values on its rim; mass is h^{d-1} on every node. The eigenpairs are the
/// discrete sine modes. With lambda_hat = lambda / lambda_1 and D = 1 + lambda_hat,
///   half_power     = sqrt(mass) U D^{1/4} U^T,
///   neg_half_power = U D^{-1/4} U^T / sqrt(mass),
/// so ||f||_{1/2} = |half_power f| and ||g||_{-1/2} = |neg_half_power (mass g)|.
class BoundaryMetric {
 public:
  explicit BoundaryMetric(const GridDomain& domain, TieOrder ties = TieOrder::lexicographic);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& sigma_nodes() const { return nodes_; }
  double mass() const { return mass_; }
  double h() const { return h_; }
  /// Rectangle extents (lateral node counts) of Sigma.
  const std::array<int, 2>& extents() const { return ext_; }

  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  Eigen::VectorXd normalized_eigenvalues() const { return lambda_ / lambda_(0); }
  /// Euclidean-orthonormal eigenvectors, one column per eigenpair, in sorted order.
  const Eigen::MatrixXd& eigenvectors() const { return U_; }
  /// Wavenumbers (k_1, k_2) of each eigenpair (k_2 = 0 in 2-D).
  const std::vector<std::array<int, 2>>& wavenumbers() const { return waves_; }
  /// Mass-normalised k-th eigenfunction as a complex Sigma vector.
  std::vector<cplx> eigenfunction(std::size_t k) const;

  /// Stiffness matrix of lap_b (mass * grid Laplacian), dense, for checks.
  Eigen::MatrixXd stiffness() const;
  Eigen::MatrixXd half_power() const;
  Eigen::MatrixXd neg_half_power() const;

  Eigen::VectorXcd apply_half(const Eigen::VectorXcd& f) const;
  /// neg_half_power applied to mass * g.
  Eigen::VectorXcd apply_neg_half_density(const Eigen::VectorXcd& g) const;

  /// Depends on the Sigma geometry only, not on the tie order.
  std::uint64_t hash() const { return hash_; }

 private:
  std::vector<std::size_t> nodes_;
  double h_ = 0.0;
  double mass_ = 0.0;
  int nl_ = 1;
  std::array<int, 2> ext_{1, 1};
  std::vector<std::array<int, 2>> pos_;  // 1-based lateral position of each node
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd U_;
  std::vector<std::array<int, 2>> waves_;
  std::uint64_t hash_ = 0;
};

struct CauchyPair {
  std::vector<cplx> f;  // Dirichlet trace on Sigma
  std::vector<cplx> g;  // outward normal derivative on Sigma
};

/// Concatenation of half_power f and neg_half_power (mass g).
Eigen::VectorXcd weighted_coordinates(const BoundaryMetric& metric, const CauchyPair& pair);

double pair_norm(const BoundaryMetric& metric, const CauchyPair& pair);

struct CauchySubspace {
  Eigen::MatrixXcd basis;  // orthonormal columns in weighted coordinates
  std::size_t m = 0;       // number of generated pairs
  std::size_t dropped = 0;
  std::uint64_t metric_hash = 0;
  std::size_t sigma_size = 0;
  std::vector<CauchyPair> pairs;               // generating pairs, in generation order
  std::vector<std::vector<cplx>> impedance;    // impedance data that produced them
  double tau = 1.0;

  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }
};

/// Modified Gram-Schmidt with one reorthogonalisation pass; columns whose residual
/// falls below drop_tol times their original norm are dropped.
Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& cols, double drop_tol = 1e-12, std::size_t* dropped = nullptr);

/// Subspace spanned by given weighted-coordinate columns (toy metrics, tests).
CauchySubspace subspace_from_columns(const Eigen::MatrixXcd& cols, std::uint64_t metric_hash = 0);

/// Cauchy pairs from the first m surface eigenfunctions used as impedance data.
CauchySubspace generate_cauchy_space(const LoadSolver& physical, const BoundaryMetric& metric, std::size_t m);
CauchySubspace generate_cauchy_space(const DomainPtr& domain, const PiecewiseLinearPotential& q,
                                     const BoundaryMetric& metric, std::size_t m, double tau = 1.0);

/// Largest singular value of (I - P_1) B_2.
double one_sided(const CauchySubspace& s1, const CauchySubspace& s2);

struct ApertureResult {
  double value = 0.0;
  double gap_12 = 0.0;  // one_sided(s1, s2)
  double gap_21 = 0.0;  // one_sided(s2, s1)
  bool unequal_dims = false;
};

ApertureResult aperture(const CauchySubspace& s1, const CauchySubspace& s2);

struct DistanceReport {
  std::size_t m = 0;
  ApertureResult at_m;
  ApertureResult at_2m;
  double rel_change = 0.0;  // |d(2m) - d(m)| / max(d(m), d(2m)), 0 when both vanish
  bool stable = true;
};

/// d(C_1, C_2) at m and 2m (capped at the Sigma size); stable when the relative change is <= tol.
DistanceReport distance_with_stabilization(const LoadSolver& physical1, const LoadSolver& physical2,
                                           const BoundaryMetric& metric, std::size_t m, double tol = 0.05,
                                           double zero_tol = 1e-10);

/// Text header line then the column-major complex basis as raw little-endian doubles.
void write_subspace(const CauchySubspace& s, std::ostream& out);
CauchySubspace read_subspace(std::istream& in);

}  // namespace lipstab
