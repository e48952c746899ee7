#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "lipstab/pde.hpp"
#include "lipstab/stats.hpp"

namespace lipstab {

using MultiIndex = std::array<int, kMaxDim>;

/// Laplace fundamental solution, -Delta Gamma = delta. dim 2 runs are flagged out_of_paper_regime.
double fundamental_solution(int dim, const Vec& x);

/// Fundamental solution of the 7-point lattice Laplacian at unit spacing (dim 3):
/// -Delta_1 g = delta_0. Thread-safe; results are cached.
double lattice_green_unit(const Index3& n);

/// Three-term far-field expansion of lattice_green_unit, error O(|n|^-7).
double lattice_green_far(const Index3& n);

/// lattice_green_unit switches from quadrature to the far-field expansion here.
inline constexpr double kLgfFarRadius = 24.0;

/// Gamma_h(n h) = lattice_green_unit(n) / h in dim 3; continuum formula in dim 2.
double lattice_fundamental_solution(int dim, const Index3& n, double h);

/// Offsets s and weights c_s with d^alpha_y F(y) ~ sum_s c_s F(y + s h): centered
/// (-1, 0, 1)/(2h) and (1, -2, 1)/h^2 in each axis, tensorised.
std::vector<std::pair<Index3, double>> derivative_stencil(const MultiIndex& order, double h);

struct GreenColumn {
  std::size_t source = 0;
  MultiIndex order{};
  ComplexField values;  // d^alpha_y G(., y)
};

/// Load -sum_s c_s e_{y+s}; throws if a stencil node is not an interior unknown.
ComplexField source_load(const LoadSolver& op, std::size_t y, const MultiIndex& order);

GreenColumn green_column(const LoadSolver& op, std::size_t y, const MultiIndex& order);
/// Columns for several (source, order) requests against one operator.
std::vector<GreenColumn> green_columns(const LoadSolver& op, const std::vector<std::pair<std::size_t, MultiIndex>>& req);

struct KernelStack {
  int J = 0;
  std::vector<ComplexField> layers;  // R_0 = G_0, R_1..R_J, R_{J+1}
  ComplexField reconstructed;        // sum of layers
};

/// G = G_0 + sum_{j=1}^{J+1} R_j, with R_j = A_0^{-1}(-W q R_{j-1}) for j <= J and
/// R_{J+1} = A_q^{-1}(-W q R_J). `laplace` must carry q = 0, `full` the potential.
KernelStack kernel_stack(const LoadSolver& laplace, const LoadSolver& full, std::size_t y);

/// Energy sum_{edges outside B_r(y)} w_e |grad G|^2 (Caccioppoli monitor).
double gradient_energy_outside(const LoadSolver& op, const ComplexField& g, std::size_t y, double r);

struct AsymptoticsOptions {
  std::vector<int> radii_h{4, 8, 16, 32};  // probe radii in units of h
  double max_radius = 0.0;                 // <= 0 selects r0 / 8
  bool value = true;
  bool gradient = true;
  bool hessian = true;
};

struct AsymptoticsReport {
  std::string configuration;  // "interior" or "interface"
  int dim = 3;
  double h = 0.0;
  std::vector<double> radii;
  std::vector<double> gamma;      // |Gamma_h| at the probe (interior) or at the nearest x (interface)
  std::vector<double> diff;       // |G - Gamma_h|
  std::vector<double> ratio;      // |G - Gamma_h| / |Gamma_h|
  std::vector<double> grad_diff;  // |grad_y (G - Gamma_h)|
  std::vector<double> hess_diff;  // |hess_y (G - Gamma_h)|_F
  std::vector<double> env_value, env_grad, env_hess;  // envelope functions at r
  stats::LinearFit fit_ratio, fit_diff, fit_grad, fit_hess;
  double sup_value_env = 0.0, sup_grad_env = 0.0, sup_hess_env = 0.0;
  double hess_envelope_drift = 0.0;  // max / min of hess_diff / env_hess
  std::vector<std::string> flags;
};

/// Source y, targets x = y + r e_axis.
AsymptoticsReport interior_asymptotics(const LoadSolver& op, std::size_t y, int axis, const AsymptoticsOptions& opt);

/// y = Q - r nu (Q the interface centre), sup over x in B_ball(Q) strictly across the interface.
AsymptoticsReport interface_asymptotics(const LoadSolver& op, std::size_t q_node, int axis, int normal_sign,
                                        double ball_radius, const AsymptoticsOptions& opt);

/// Envelopes of the interior/interface bounds at radius r (dim >= 3; dim 2 uses the dim 3 forms).
double envelope_value(int dim, double r);
double envelope_gradient(int dim, double r);
double envelope_hessian(int dim, double r);

}  // namespace lipstab
