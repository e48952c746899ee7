#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lipstab/cauchy.hpp"
#include "lipstab/geometry.hpp"
#include "lipstab/pde.hpp"
#include "lipstab/potential.hpp"
#include "lipstab/stats.hpp"

namespace lipstab {

/// omega_b(t) = 2^b e^{-2} |log t|^{-b} for t < e^{-2}, e^{-2} beyond.
double omega_b(double b, double t);

/// order 0 is t^alpha; order j >= 1 is the j-fold composition of omega_b.
struct Modulus {
  double b = 1.0;
  int order = 1;
  double alpha = 0.5;

  double operator()(double t) const;
};

struct ModulusCheck {
  std::string property;
  std::size_t points = 0;
  std::size_t violations = 0;
  double worst = 0.0;  // largest violation, relative to the compared value
  double first_violation = 0.0;  // t of the first violating grid point

  bool holds() const { return violations == 0; }
};

/// Log-spaced grid of `points` values in [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t points);

/// t omega(1/t) nondecreasing on a log grid of [lo, hi].
ModulusCheck check_t_omega_inverse(const Modulus& w, double lo, double hi, std::size_t points, double rtol = 1e-12);
/// omega_b(t / beta) <= |log(e beta^{-1/2})|^b omega_b(t).
ModulusCheck check_dilation(double b, double beta, double lo, double hi, std::size_t points, double rtol = 1e-12);
/// omega_b(t^beta) <= beta^{-b} omega_b(t).
ModulusCheck check_power(double b, double beta, double lo, double hi, std::size_t points, double rtol = 1e-12);
/// Midpoint concavity on consecutive grid triples.
ModulusCheck check_concavity(const Modulus& w, double lo, double hi, std::size_t points, double rtol = 1e-12);
ModulusCheck check_monotone(const Modulus& w, double lo, double hi, std::size_t points);

/// Coefficients uniform in [-c, c] with c = e0 / (1 + sqrt(dim)), so |||q||| <= e0.
template <class Rng>
PiecewiseLinearPotential random_potential(Rng& rng, int dim, std::size_t pieces, double e0);

struct SweepOptions {
  std::size_t n_samples = 50;
  std::uint64_t seed = 1;
  std::size_t m = 20;
  double e0 = 2.0;
  double tau = 1.0;
  double stab_tol = 0.05;
  double zero_tol = 1e-10;
  bool inject_degenerate = true;
  std::vector<double> scaling_deltas{1e-2, 1e-3};
};

enum class SweepKind { random, degenerate, scaling };
const char* to_string(SweepKind k);

struct SweepRecord {
  std::size_t index = 0;
  SweepKind kind = SweepKind::random;
  std::uint64_t seed = 0;
  std::vector<double> theta1, theta2;
  double e = 0.0;     // sup |q1 - q2|
  double eps0 = 0.0;  // aperture at m
  double eps0_2m = 0.0;
  double rel_change = 0.0;
  double ratio = 0.0;  // e / eps0, NaN when eps0 <= zero_tol
  bool stable = true;
  double delta = 0.0;  // scaling shift
};

struct SweepSummary {
  std::size_t included = 0;
  std::size_t unstable = 0;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  double median_ratio = 0.0;
  double spearman = 0.0;
  bool degenerate_ok = true;  // eps0 <= zero_tol on every E = 0 record
  double degenerate_eps0 = 0.0;
  bool injective = true;      // eps0 <= zero_tol  <=>  E <= zero_tol
  double scaling_drift = 0.0; // max / min ratio over scaling records
  bool scaling_monotone = true;
  std::vector<std::string> flags;
};

struct SweepResult {
  std::string fixture;
  std::uint64_t fixture_hash = 0;
  double h = 0.0;
  SweepOptions options;
  std::vector<SweepRecord> records;
  SweepSummary summary;
};

/// Random pairs in the e0 box plus the degenerate and scaling pairs; samples run in parallel.
SweepResult stability_sweep(const DomainPtr& domain, const std::string& fixture, const SweepOptions& opt);

struct BoundaryProbeReport {
  double h = 0.0;
  int axis = 0;
  std::vector<double> r;
  std::vector<cplx> v1, v2;  // d_{y_n} d_{z_n} S and d^2_{y_n} d^2_{z_n} S at y = z = P_1 - r nu_1
  double jump = 0.0, slope = 0.0;            // recovered (q1 - q2)(P_1) and d_nu (q1 - q2)(P_1)
  double jump_true = 0.0, slope_true = 0.0;  // from the D_{j_1} piece
  double jump_error = 0.0, slope_error = 0.0;  // relative, absolute when the truth vanishes
  double fit_r2 = 0.0;         // joint fit of both orders against the envelopes
  stats::LinearFit fit_v1;     // log |v1| against log r
  stats::LinearFit fit_v2;
  stats::LinearFit fit_ratio;  // log |v2 / v1| against log r
  bool low_confidence = false;
  std::vector<std::string> flags;
};

/// op_i are augmented operators of q_i; radii in units of h, each >= 4.
/// The envelopes are the same probes for a unit jump and a unit normal slope on
/// D_{j_1} against a zero background, on the same grid. Both orders are fitted jointly:
///   v_o / env_o,jump = c + s env_o,slope / env_o,jump + d_o r.
BoundaryProbeReport boundary_stability_probe(const LoadSolver& op1, const LoadSolver& op2,
                                             const PiecewiseLinearPotential& q1, const PiecewiseLinearPotential& q2,
                                             const Chain& chain, const std::vector<int>& radii_h);

/// Least squares misfit over the impedance-generated pairs:
///   J(theta) = sum_k |weighted_coordinates(pair_k(theta) - observed_k)|^2.
class DataMisfit {
 public:
  DataMisfit(DomainPtr domain, std::shared_ptr<const BoundaryMetric> metric, const CauchySubspace& observed, double e0);

  /// Observed data from the generation problems of q_true.
  static DataMisfit from_truth(DomainPtr domain, std::shared_ptr<const BoundaryMetric> metric,
                               const PiecewiseLinearPotential& q_true, std::size_t m, double tau = 1.0);

  std::size_t parameters() const;
  std::size_t data_count() const { return observed_.pairs.size(); }
  const CauchySubspace& observed() const { return observed_; }
  double e0() const { return e0_; }
  int dim() const { return domain_->dim(); }

  struct State {
    std::vector<double> theta;
    std::unique_ptr<DiscreteOperator> op;
    std::vector<ComplexField> u;
    std::vector<Eigen::VectorXcd> residual;  // weighted coordinates of the pair errors
    double value = 0.0;
  };

  State evaluate(const std::vector<double>& theta) const;
  double value(const std::vector<double>& theta) const { return evaluate(theta).value; }
  /// Adjoint-state gradient.
  std::vector<double> gradient(const State& s) const;
  std::vector<double> gradient(const std::vector<double>& theta) const { return gradient(evaluate(theta)); }
  /// Real Jacobian of the stacked residual (real parts then imaginary parts).
  Eigen::MatrixXd jacobian(const State& s) const;
  /// Aperture between the span of the model pairs and the observed space.
  double aperture_to_observed(const State& s) const;

 private:
  Eigen::VectorXcd adjoint_source(const Eigen::VectorXcd& r) const;
  /// Node-wise w_n dq_n / dtheta_p on the active set of s.op.
  ComplexField potential_derivative(const State& s, std::size_t p, const ComplexField& v) const;

  DomainPtr domain_;
  std::shared_ptr<const BoundaryMetric> metric_;
  CauchySubspace observed_;
  std::vector<Eigen::VectorXcd> observed_coords_;
  Eigen::MatrixXd H_, N_;
  double e0_ = 0.0;
};

enum class StepPolicy { landweber, gauss_newton };
const char* to_string(StepPolicy p);

struct ReconstructionOptions {
  StepPolicy policy = StepPolicy::landweber;
  int iterations = 500;
  double misfit_tol = 1e-30;   // absolute
  double relative_tol = 1e-24; // misfit / initial misfit
  double step_tol = 1e-12;     // GN step norm relative to 1 + |theta|
  int max_increases = 5;
  int power_iterations = 100;
  bool trace_aperture = true;
};

struct TraceRow {
  int iter = 0;
  double misfit = 0.0;
  double aperture = 0.0;
  double coeff_error = 0.0;  // NaN without a truth
  double step = 0.0;
};

struct ReconstructionResult {
  std::vector<double> theta;
  std::vector<TraceRow> trace;
  int iterations = 0;
  bool converged = false;
  bool aborted = false;
  std::string reason;
  double lipschitz = 0.0;  // power-iteration estimate (Landweber)
  double coeff_error = 0.0;
};

/// Euclidean projection of every (a_j, A_j) block onto |a_j| + |A_j| <= e0.
std::vector<double> project_coefficients(const std::vector<double>& theta, int dim, double e0);

/// |||theta - truth||| / |||truth|||.
double coefficient_error(const std::vector<double>& theta, const std::vector<double>& truth, int dim);

ReconstructionResult reconstruct(const DataMisfit& misfit, std::vector<double> theta0,
                                 const std::vector<double>& truth, const ReconstructionOptions& opt);

template <class Rng>
PiecewiseLinearPotential random_potential(Rng& rng, int dim, std::size_t pieces, double e0) {
  const double c = e0 / (1.0 + std::sqrt(static_cast<double>(dim)));
  std::uniform_real_distribution<double> u(-c, c);
  std::vector<AffinePiece> p(pieces);
  for (auto& piece : p) {
    piece.a = u(rng);
    for (int a = 0; a < dim; ++a) piece.A[static_cast<std::size_t>(a)] = u(rng);
  }
  return PiecewiseLinearPotential(dim, std::move(p), e0);
}

}  // namespace lipstab
