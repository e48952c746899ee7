#pragma once

#include <memory>
#include <string>

#include "lipstab/pde.hpp"

namespace lipstab {

/// Direct solver for the mixed problem on Omega_0 when Omega_0 is the whole grid box,
/// Sigma_0 is the whole far face and q depends only on the normal coordinate.
/// Sine transforms in the lateral axes decouple the modes; each mode is a complex
/// tridiagonal system along the normal axis. Same discrete operator as DiscreteOperator.
class LayeredSolver : public LoadSolver {
 public:
  LayeredSolver(DomainPtr domain, std::vector<double> q_nodes, double tau = 1.0);
  LayeredSolver(DomainPtr domain, const PiecewiseLinearPotential& q, double tau = 1.0);
  ~LayeredSolver() override;

  /// True when the layered structure holds; otherwise `why` names the failing condition.
  static bool supports(const GridDomain& domain, const std::vector<double>& q_nodes, std::string* why = nullptr);

  ComplexField solve_load(const ComplexField& load) const override;
  /// Loads are solved one after another; each solve is internally parallel.
  std::vector<ComplexField> solve_loads(std::span<const ComplexField> loads) const override;

  std::size_t mode_count() const { return modes_; }
  std::size_t plane_count() const { return planes_; }

 private:
  struct Plan;
  std::unique_ptr<Plan> plan_;
  int lateral_[2] = {0, 0};
  int nlat_[2] = {1, 1};
  std::size_t modes_ = 0;
  std::size_t planes_ = 0;
  std::vector<int> grid_plane_;   // unknown plane p -> grid index along the normal axis
  std::vector<double> q_plane_;   // q per unknown plane
  std::vector<double> mu_;        // lateral eigenvalue per mode
};

/// Layered solver when supported, sparse LU otherwise.
std::unique_ptr<LoadSolver> make_augmented_solver(DomainPtr domain, const PiecewiseLinearPotential& q, double tau = 1.0);

}  // namespace lipstab
