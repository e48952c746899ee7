#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lipstab/cauchy.hpp"
#include "lipstab/green.hpp"
#include "lipstab/pde.hpp"
#include "lipstab/stats.hpp"

namespace lipstab {

/// U_k = Omega_0 \ closure(W_k) with W_k = D_0 u D_{j_1} u .. u D_{j_k}, discretised by cells.
///
/// weight[n] = sum over U_k cells c touching n of h^d / 2^d (q1 - q2)|_c (x_n), the
/// trapezoid rule per cell with the piece of that cell.
struct UnresolvedRegion {
  int k = 0;
  std::vector<double> weight;
  std::vector<std::uint8_t> touches;  // node is a corner of some U_k cell
  std::vector<int> resolved;          // labels in W_k (0 included)
};

UnresolvedRegion unresolved_region(const GridDomain& domain, const PiecewiseLinearPotential& q1,
                                   const PiecewiseLinearPotential& q2, const Chain& chain, int k);

/// sum_x w(x) d^alpha_y G_1(x, y) d^beta_z G_2(x, z) with G_i the columns of op_i.
cplx singular_value(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u, std::size_t y,
                    std::size_t z, const MultiIndex& alpha = {}, const MultiIndex& beta = {});

/// y -> S(y, z) on the whole grid: A_1^{-1}(-w d^beta_z G_2(., z)).
ComplexField singular_field(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u, std::size_t z,
                            const MultiIndex& beta = {});

/// max over active nodes not touching U_k of |A_1 S(., z)|, relative to max |A_1 S|.
double singular_field_residual(const LoadSolver& op1, const UnresolvedRegion& u, const ComplexField& s);

/// (S, d_{y_a} d_{z_a} S, d^2_{y_a} d^2_{z_a} S) at (y, y).
std::array<cplx, 3> probe_values(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u,
                                 std::size_t y, int axis);

struct GreenIdentity {
  cplx volume;    // sum_n w_n (q1 - q2)(x_n) u1 u2
  cplx boundary;  // sum_Sigma h^{d-1} (u1 d_nu u2 - u2 d_nu u1)
  double residual = 0.0;  // |volume - boundary| / max(|volume|, |boundary|, sum of |boundary terms|, eps)
};

/// Both operators physical, u_i a solution of the i-th generation problem.
GreenIdentity green_identity_residual(const LoadSolver& op1, const LoadSolver& op2, const ComplexField& u1,
                                      const ComplexField& u2);

struct AlessandriniSample {
  GreenIdentity identity;
  double norm1 = 0.0, norm2 = 0.0;  // pair norms of the Cauchy data
  double bound = 0.0;               // d * norm1 * norm2
  bool holds = false;
};

struct AlessandriniReport {
  ApertureResult distance;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<AlessandriniSample> samples;
  double max_residual = 0.0;
  double max_ratio = 0.0;  // |volume| / bound
  std::size_t holds = 0;
};

/// Samples u_i in span C_i(m) (random complex combinations of the generating data).
AlessandriniReport alessandrini_check(const LoadSolver& op1, const LoadSolver& op2, const BoundaryMetric& metric,
                                      std::size_t m, std::size_t n_samples, std::uint64_t seed);

/// Node-wise max of |v| over nodes of the closed domain with |x - c| <= r.
double ball_max(const GridDomain& domain, const ComplexField& v, const Vec& center, double r);

/// tau = log(M3/M2) / log(M3/M1); NaN when M3 == M1.
double three_spheres_tau(double m1, double m2, double m3);

struct ThreeSpheresReport {
  Vec center{};
  std::array<double, 3> radii{};
  std::vector<std::array<double, 3>> maxima;
  std::vector<double> tau;  // per nondegenerate sample
  std::size_t degenerate = 0;
  double tau_min = 0.0, tau_max = 0.0;
  double half_constant = 0.0;  // max M2 / sqrt(M1 M3)
  bool all_in_open_interval = false;
};

ThreeSpheresReport three_spheres(const GridDomain& domain, const std::vector<ComplexField>& samples,
                                 const Vec& center, const std::array<double, 3>& radii);

/// Solutions of the generation problem for random combinations of the first `modes`
/// surface eigenfunctions (independent standard complex Gaussian coefficients).
std::vector<ComplexField> random_solutions(const LoadSolver& physical, const BoundaryMetric& metric,
                                           std::size_t count, std::size_t modes, std::uint64_t seed);

struct ProbeRow {
  double r = 0.0;
  std::size_t y = 0;
  cplx s, ds, d2s;  // S, d_{y_n} d_{z_n} S, d^2_{y_n} d^2_{z_n} S at (y, y)
  double envelope = 0.0;  // (dist(y,U_k) dist(z,U_k))^{2 - n/2}
};

struct ProbeReport {
  int k = 0;
  int dim = 3;
  double h = 0.0;
  int axis = 0;  // derivatives along the interface normal
  std::vector<ProbeRow> rows;
  stats::LinearFit fit_first;   // log(|dS|/|S|) vs log r
  stats::LinearFit fit_second;  // log(|d2S|/|S|) vs log r
  double pde_residual = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::optional<double> eps0;
  std::vector<std::string> flags;
};

/// Probes at y_{k+1} = P_{k+1} - 2 r nu_{k+1}, r = radii_h * h. op_i are augmented operators.
ProbeReport smallness_propagation_report(const LoadSolver& op1, const LoadSolver& op2,
                                         const PiecewiseLinearPotential& q1, const PiecewiseLinearPotential& q2,
                                         const Chain& chain, int k, const std::vector<int>& radii_h,
                                         std::optional<double> eps0 = std::nullopt, bool check_pde = true);

}  // namespace lipstab
