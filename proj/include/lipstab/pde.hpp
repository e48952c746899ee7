#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "lipstab/geometry.hpp"
#include "lipstab/potential.hpp"

namespace lipstab {

using cplx = std::complex<double>;

/// Complex grid function; one value per grid node, zero off the active set.
struct ComplexField {
  DomainPtr domain;
  std::vector<cplx> values;

  ComplexField() = default;
  explicit ComplexField(DomainPtr d) : domain(std::move(d)), values(domain ? domain->node_count() : 0) {}

  cplx& operator[](std::size_t n) { return values[n]; }
  const cplx& operator[](std::size_t n) const { return values[n]; }
  std::size_t size() const { return values.size(); }
  bool finite() const;
  double max_abs() const;
};

ComplexField operator+(const ComplexField& a, const ComplexField& b);
ComplexField operator-(const ComplexField& a, const ComplexField& b);

enum class Region {
  augmented,  // Omega_0, Dirichlet on dOmega_0 \ Sigma_0, impedance on Sigma_0
  physical,   // Omega, Dirichlet on dOmega \ Sigma, impedance on Sigma
  dirichlet,  // Omega, Dirichlet everywhere (diagnostics only)
};

struct BcDescriptor {
  Region region = Region::augmented;
  double tau = 1.0;  // impedance coefficient i*tau
};

/// Common data of the discrete mixed problem (Delta + q) v = f.
///
/// Rows are scaled by the nodal quadrature weight, so the matrix is
///   A = -L - i tau h^{d-1} I_imp + diag(w q),
/// with L the weighted graph Laplacian (edge weight h^{d-2}, halved inside the
/// impedance plane). This is the ghost-node elimination of the centered scheme.
class LoadSolver {
 public:
  LoadSolver(DomainPtr domain, std::vector<double> q_nodes, BcDescriptor bc);
  virtual ~LoadSolver() = default;
  LoadSolver(const LoadSolver&) = delete;
  LoadSolver& operator=(const LoadSolver&) = delete;

  const GridDomain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  const BcDescriptor& bc() const { return bc_; }
  double h() const { return domain_->h(); }
  int dim() const { return domain_->dim(); }

  bool active(std::size_t n) const { return active_[n] != 0; }
  bool impedance(std::size_t n) const { return impedance_[n] != 0; }
  const std::vector<std::size_t>& active_nodes() const { return active_nodes_; }
  const std::vector<std::size_t>& impedance_nodes() const { return impedance_nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& potential() const { return q_; }
  int impedance_plane() const { return imp_plane_; }
  double surface_weight() const { return surface_w_; }
  /// Weight of the edge from n along +axis (or 0 if no such edge touches the active set).
  double edge_weight(std::size_t n, int axis) const;

  /// Matrix-free A v (load space).
  ComplexField apply(const ComplexField& v) const;
  /// A v without the impedance term (used for discrete normal derivatives).
  ComplexField apply_without_impedance(const ComplexField& v) const;

  virtual ComplexField solve_load(const ComplexField& load) const = 0;
  /// Solves for several loads; parallel over loads unless overridden.
  virtual std::vector<ComplexField> solve_loads(std::span<const ComplexField> loads) const;
  /// Serial reference for solve_loads.
  std::vector<ComplexField> solve_loads_serial(std::span<const ComplexField> loads) const;

  /// Solves (Delta + q) v = f with f a density (load = w f).
  ComplexField solve(const ComplexField& f) const;

  /// sum_e w_e |v_i - v_j|^2.
  double gradient_energy(const ComplexField& v) const;
  /// sum over impedance nodes of h^{d-1} |v|^2.
  double boundary_mass(const ComplexField& v) const;
  /// sum_i w_i a_i conj(b_i) over active nodes.
  cplx weighted_inner(const ComplexField& a, const ComplexField& b) const;
  /// sum_i w_i q_i |v_i|^2.
  double potential_energy(const ComplexField& v) const;

  /// Relative residual ||A v - load|| / ||load|| over active rows.
  double residual(const ComplexField& v, const ComplexField& load) const;

 protected:
  void check_conforming(const ComplexField& f) const;

  DomainPtr domain_;
  BcDescriptor bc_;
  std::vector<double> q_;
  std::vector<std::uint8_t> active_;
  std::vector<std::uint8_t> impedance_;
  std::vector<std::uint8_t> closure_;
  std::vector<std::size_t> active_nodes_;
  std::vector<std::size_t> impedance_nodes_;
  std::vector<double> weights_;
  int imp_plane_ = -1;
  double surface_w_ = 0.0;
  std::array<std::ptrdiff_t, kMaxDim> stride_{};

 private:
  ComplexField apply_impl(const ComplexField& v, bool with_impedance) const;
};

/// Sparse assembly + direct factorization, reused across right-hand sides.
class DiscreteOperator : public LoadSolver {
 public:
  DiscreteOperator(DomainPtr domain, std::vector<double> q_nodes, BcDescriptor bc, bool factorize = true);
  DiscreteOperator(DomainPtr domain, const PiecewiseLinearPotential& q, BcDescriptor bc, bool factorize = true);

  using Matrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
  const Matrix& matrix() const { return matrix_; }
  std::ptrdiff_t dof(std::size_t node) const { return dof_[node]; }
  std::size_t dof_count() const { return active_nodes_.size(); }
  bool factorized() const { return lu_ != nullptr; }

  ComplexField solve_load(const ComplexField& load) const override;

  /// Inverse-iteration estimate of the smallest singular value of the matrix.
  double smallest_singular_value(int iterations = 30) const;
  /// Max absolute row sum (infinity norm).
  double norm_inf() const;

 private:
  void assemble();

  std::vector<std::ptrdiff_t> dof_;
  Matrix matrix_;
  std::unique_ptr<Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>> lu_;
};

/// Operator of the given region for potential q (q is extended to D_0 when needed).
std::unique_ptr<DiscreteOperator> assemble(DomainPtr domain, const PiecewiseLinearPotential& q, BcDescriptor bc);

/// Solves Delta u + q u = 0 in Omega, u = 0 on dOmega \ Sigma, d_nu u + i tau u = g on Sigma.
/// `g` is indexed like domain.sigma_nodes().
ComplexField solve_generation_problem(const LoadSolver& physical, std::span<const cplx> g);
std::vector<ComplexField> solve_generation_problems(const LoadSolver& physical,
                                                    const std::vector<std::vector<cplx>>& data);

/// Discrete outward normal derivative on Sigma, consistent with the impedance rows:
/// d_nu u = -(A_0 u) / h^{d-1} with A_0 the operator without the impedance term.
std::vector<cplx> normal_derivative(const LoadSolver& physical, const ComplexField& u);
std::vector<cplx> sigma_trace(const GridDomain& domain, const ComplexField& u);

}  // namespace lipstab
