#include "lipstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "lipstab/kernels.hpp"
#include "lipstab/layered.hpp"
#include "lipstab/probes.hpp"
#include "lipstab/random.hpp"

namespace lipstab {

namespace {

constexpr double kPlateau = 0.1353352832366127;  // e^{-2}
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ModulusCheck make_check(std::string name, std::size_t points) {
  ModulusCheck c;
  c.property = std::move(name);
  c.points = points;
  return c;
}

void record(ModulusCheck& c, double t, double excess) {
  if (excess <= 0.0) return;
  if (c.violations == 0) c.first_violation = t;
  ++c.violations;
  c.worst = std::max(c.worst, excess);
}

double block_norm(const std::vector<double>& th, std::size_t j, int dim) {
  const auto s = static_cast<std::size_t>(dim + 1);
  double g = 0.0;
  for (int a = 0; a < dim; ++a) g += th[j * s + 1 + static_cast<std::size_t>(a)] * th[j * s + 1 + static_cast<std::size_t>(a)];
  return std::abs(th[j * s]) + std::sqrt(g);
}

double triple_norm(const std::vector<double>& th, int dim) {
  double m = 0.0;
  for (std::size_t j = 0; j < th.size() / static_cast<std::size_t>(dim + 1); ++j) m = std::max(m, block_norm(th, j, dim));
  return m;
}

double euclid(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double omega_b(double b, double t) {
  if (!(t > 0.0)) throw std::domain_error("omega_b needs t > 0");
  if (!(b > 0.0)) throw std::domain_error("omega_b needs b > 0");
  if (t >= kPlateau) return kPlateau;
  return std::pow(2.0, b) * kPlateau * std::pow(-std::log(t), -b);
}

double Modulus::operator()(double t) const {
  if (!(t > 0.0)) throw std::domain_error("modulus needs t > 0");
  if (order < 0) throw std::domain_error("modulus order must be >= 0");
  if (order == 0) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
    return std::pow(t, alpha);
  }
  double v = t;
  for (int j = 0; j < order; ++j) v = omega_b(b, v);
  return v;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw std::invalid_argument("log grid needs 0 < lo < hi and 2 points");
  std::vector<double> t(points);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) t[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  t.front() = lo;
  t.back() = hi;
  return t;
}

ModulusCheck check_t_omega_inverse(const Modulus& w, double lo, double hi, std::size_t points, double rtol) {
  ModulusCheck c = make_check("t*omega(1/t) nondecreasing", points);
  const auto t = log_grid(lo, hi, points);
  double prev = t[0] * w(1.0 / t[0]);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double f = t[i] * w(1.0 / t[i]);
    record(c, t[i], (prev - f) / prev - rtol);
    prev = f;
  }
  return c;
}

ModulusCheck check_dilation(double b, double beta, double lo, double hi, std::size_t points, double rtol) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  ModulusCheck c = make_check("omega(t/beta) <= |log(e beta^-1/2)|^b omega(t)", points);
  const double k = std::pow(std::abs(1.0 - 0.5 * std::log(beta)), b);
  for (double t : log_grid(lo, hi, points)) {
    const double rhs = k * omega_b(b, t);
    record(c, t, (omega_b(b, t / beta) - rhs) / rhs - rtol);
  }
  return c;
}

ModulusCheck check_power(double b, double beta, double lo, double hi, std::size_t points, double rtol) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  ModulusCheck c = make_check("omega(t^beta) <= beta^-b omega(t)", points);
  const double k = std::pow(beta, -b);
  for (double t : log_grid(lo, hi, points)) {
    const double rhs = k * omega_b(b, t);
    record(c, t, (omega_b(b, std::pow(t, beta)) - rhs) / rhs - rtol);
  }
  return c;
}

ModulusCheck check_concavity(const Modulus& w, double lo, double hi, std::size_t points, double rtol) {
  ModulusCheck c = make_check("midpoint concavity", points);
  const auto t = log_grid(lo, hi, points);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double mid = w(0.5 * (t[i] + t[i + 1]));
    const double chord = 0.5 * (w(t[i]) + w(t[i + 1]));
    record(c, t[i], (chord - mid) / chord - rtol);
  }
  return c;
}

ModulusCheck check_monotone(const Modulus& w, double lo, double hi, std::size_t points) {
  ModulusCheck c = make_check("nondecreasing", points);
  const auto t = log_grid(lo, hi, points);
  double prev = w(t[0]);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double f = w(t[i]);
    record(c, t[i], (prev - f) / prev);
    prev = f;
  }
  return c;
}

// ---------------------------------------------------------------------------- sweep

const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::random: return "random";
    case SweepKind::degenerate: return "degenerate";
    case SweepKind::scaling: return "scaling";
  }
  return "?";
}

SweepResult stability_sweep(const DomainPtr& domain, const std::string& fixture, const SweepOptions& opt) {
  if (opt.n_samples == 0) throw std::invalid_argument("n_samples must be positive");
  if (!(opt.e0 > 0.0)) throw std::invalid_argument("e0 must be positive");
  const GridDomain& g = *domain;
  const BoundaryMetric metric(g);
  if (opt.m == 0 || opt.m > metric.size()) throw std::invalid_argument("m must lie in [1, |Sigma|]");
  const int dim = g.dim();
  const std::size_t pieces = g.spec().subdomains.size();

  SweepResult res;
  res.fixture = fixture;
  res.fixture_hash = domain_hash(g);
  res.h = g.h();
  res.options = opt;

  struct Job {
    SweepKind kind;
    std::uint64_t index;
    double delta;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < opt.n_samples; ++i) jobs.push_back({SweepKind::random, i, 0.0});
  if (opt.inject_degenerate) jobs.push_back({SweepKind::degenerate, opt.n_samples, 0.0});
  for (double d : opt.scaling_deltas) jobs.push_back({SweepKind::scaling, opt.n_samples + 1, d});

  std::vector<SweepRecord> recs(jobs.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ji = 0; ji < static_cast<std::ptrdiff_t>(jobs.size()); ++ji) {
    try {
      const Job& job = jobs[static_cast<std::size_t>(ji)];
      auto rng = sample_rng(opt.seed, job.index);
      const PiecewiseLinearPotential q1 = random_potential(rng, dim, pieces, opt.e0);
      PiecewiseLinearPotential q2 = q1;
      if (job.kind == SweepKind::random) {
        q2 = random_potential(rng, dim, pieces, opt.e0);
      } else if (job.kind == SweepKind::scaling) {
        auto th = q1.coefficients();
        for (std::size_t j = 0; j < pieces; ++j) th[j * static_cast<std::size_t>(dim + 1)] += job.delta;
        q2 = PiecewiseLinearPotential::from_coefficients(dim, th, opt.e0 + job.delta);
      }
      const DiscreteOperator op1(domain, q1, BcDescriptor{Region::physical, opt.tau});
      const DiscreteOperator op2(domain, q2, BcDescriptor{Region::physical, opt.tau});
      const DistanceReport d = distance_with_stabilization(op1, op2, metric, opt.m, opt.stab_tol, opt.zero_tol);
      SweepRecord& r = recs[static_cast<std::size_t>(ji)];
      r.index = static_cast<std::size_t>(ji);
      r.kind = job.kind;
      r.seed = opt.seed;
      r.delta = job.delta;
      r.theta1 = q1.coefficients();
      r.theta2 = q2.coefficients();
      r.e = sup_norm(q1 - q2, g);
      r.eps0 = d.at_m.value;
      r.eps0_2m = d.at_2m.value;
      r.rel_change = d.rel_change;
      r.stable = d.stable;
      r.ratio = r.eps0 > opt.zero_tol ? r.e / r.eps0 : kNaN;
    } catch (...) {
#pragma omp critical(lipstab_sweep_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  res.records = std::move(recs);

  SweepSummary& s = res.summary;
  std::vector<double> es, eps, ratios, sc_delta, sc_eps, sc_ratio;
  for (const SweepRecord& r : res.records) {
    if (!r.stable) {
      ++s.unstable;
      continue;
    }
    const bool e_zero = r.e <= opt.zero_tol;
    const bool d_zero = r.eps0 <= opt.zero_tol;
    if (e_zero != d_zero) s.injective = false;
    if (e_zero) {
      s.degenerate_eps0 = std::max(s.degenerate_eps0, r.eps0);
      if (!d_zero) s.degenerate_ok = false;
    }
    if (r.kind == SweepKind::random) {
      ++s.included;
      es.push_back(r.e);
      eps.push_back(r.eps0);
      if (r.eps0 > opt.zero_tol) ratios.push_back(r.ratio);
    } else if (r.kind == SweepKind::scaling) {
      sc_delta.push_back(r.delta);
      sc_eps.push_back(r.eps0);
      if (r.eps0 > opt.zero_tol) sc_ratio.push_back(r.ratio);
    }
  }
  if (!ratios.empty()) {
    s.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    s.min_ratio = *std::min_element(ratios.begin(), ratios.end());
    s.median_ratio = stats::median(ratios);
  }
  if (es.size() >= 2) {
    s.spearman = stats::spearman(es, eps);
  } else {
    s.flags.emplace_back("too_few_samples");
  }
  if (sc_ratio.size() >= 2) {
    s.scaling_drift = *std::max_element(sc_ratio.begin(), sc_ratio.end()) / *std::min_element(sc_ratio.begin(), sc_ratio.end());
  }
  for (std::size_t a = 0; a < sc_delta.size(); ++a) {
    for (std::size_t b = 0; b < sc_delta.size(); ++b) {
      if (sc_delta[a] > sc_delta[b] && !(sc_eps[a] > sc_eps[b])) s.scaling_monotone = false;
    }
  }
  if (s.unstable > 0) s.flags.emplace_back("unstable_records_excluded");
  if (!s.degenerate_ok) s.flags.emplace_back("degenerate_pair_not_resolved");
  if (!s.injective) s.flags.emplace_back("injectivity_violated");
  if (g.out_of_paper_regime()) s.flags.emplace_back("out_of_paper_regime");
  return res;
}

// ---------------------------------------------------------------------------- boundary probe

BoundaryProbeReport boundary_stability_probe(const LoadSolver& op1, const LoadSolver& op2,
                                             const PiecewiseLinearPotential& q1, const PiecewiseLinearPotential& q2,
                                             const Chain& chain, const std::vector<int>& radii_h) {
  const GridDomain& g = op1.domain();
  if (g.dim() != 3) throw std::invalid_argument("the boundary probe constants are three-dimensional");
  if (op1.bc().region != Region::augmented || op2.bc().region != Region::augmented) {
    throw std::invalid_argument("probes need the augmented operators");
  }
  if (chain.interfaces.empty() || chain.order.empty()) throw std::invalid_argument("chain has no first interface");
  if (radii_h.size() < 3) throw std::invalid_argument("boundary probe needs at least three radii");
  const InterfaceRecord& itf = chain.interfaces.front();
  BoundaryProbeReport rep;
  rep.h = g.h();
  rep.axis = itf.axis;
  const UnresolvedRegion u = unresolved_region(g, q1, q2, chain, 0);
  bool beyond = false;
  std::vector<std::size_t> ys;
  for (int rh : radii_h) {
    if (rh < 4) throw std::invalid_argument("probe radius below 4h");
    const double r = rh * g.h();
    beyond = beyond || r > g.r0() / 16.0 + 1e-12;
    Index3 p = g.ijk(itf.center_node);
    p[static_cast<std::size_t>(itf.axis)] -= rh * itf.normal_sign;
    if (!g.in_grid(p)) throw std::invalid_argument("probe point leaves the grid");
    ys.push_back(g.node(p));
    const auto v = probe_values(op1, op2, u, ys.back(), itf.axis);
    rep.r.push_back(r);
    rep.v1.push_back(v[1]);
    rep.v2.push_back(v[2]);
  }
  if (beyond) rep.flags.emplace_back("radius_beyond_window");

  // Discrete envelopes: unit jump and unit normal slope on D_{j_1}, zero background.
  const int j1 = chain.order.front();
  const Vec nu = itf.normal();
  const Vec p1 = g.coords(itf.center_node);
  const std::size_t pieces = g.spec().subdomains.size();
  auto reference = [&](bool slope) {
    std::vector<AffinePiece> pc(pieces);
    AffinePiece& pj = pc[static_cast<std::size_t>(j1 - 1)];
    if (slope) {
      pj.A = nu;
      pj.a = -(nu[0] * p1[0] + nu[1] * p1[1] + nu[2] * p1[2]);
    } else {
      pj.a = 1.0;
    }
    return PiecewiseLinearPotential(3, std::move(pc), 1.0 + std::abs(pj.a));
  };
  const PiecewiseLinearPotential zero(3, std::vector<AffinePiece>(pieces), 1.0);
  const double tau = op1.bc().tau;
  const auto z0 = make_augmented_solver(op1.domain_ptr(), zero, tau);
  std::array<std::vector<std::array<cplx, 3>>, 2> env;
  for (int sl = 0; sl < 2; ++sl) {
    const PiecewiseLinearPotential qr = reference(sl == 1);
    const auto o = make_augmented_solver(op1.domain_ptr(), qr, tau);
    const UnresolvedRegion ur = unresolved_region(g, qr, zero, chain, 0);
    for (std::size_t y : ys) env[static_cast<std::size_t>(sl)].push_back(probe_values(*o, *z0, ur, y, itf.axis));
  }

  const std::size_t n = rep.r.size();
  std::vector<double> a1(n), a2(n), ratio(n);
  // Rows i: v1 / e1c = c + s e1s / e1c + d1 r; rows n + i: same for order 2.
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 4);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    a1[i] = std::abs(rep.v1[i]);
    a2[i] = std::abs(rep.v2[i]);
    ratio[i] = a1[i] > 0.0 ? a2[i] / a1[i] : 0.0;
    for (std::size_t o = 1; o <= 2; ++o) {
      const auto row = static_cast<Eigen::Index>((o - 1) * n + i);
      const double ec = env[0][i][o].real();
      X(row, 0) = 1.0;
      X(row, 1) = env[1][i][o].real() / ec;
      X(row, static_cast<Eigen::Index>(1 + o)) = rep.r[i];
      rhs(row) = (o == 1 ? rep.v1[i] : rep.v2[i]).real() / ec;
    }
  }
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(rhs);
  rep.jump = coef(0);
  rep.slope = coef(1);
  const Eigen::VectorXd res = rhs - X * coef;
  const double mean = rhs.mean();
  const double tot = (rhs.array() - mean).square().sum();
  rep.fit_r2 = tot > 0.0 ? 1.0 - res.squaredNorm() / tot : 1.0;

  rep.fit_v1 = stats::loglog_fit(rep.r, a1);
  rep.fit_v2 = stats::loglog_fit(rep.r, a2);
  rep.fit_ratio = stats::loglog_fit(rep.r, ratio);
  rep.low_confidence = rep.fit_v1.n < 2 || rep.fit_v2.n < 2 || rep.fit_v1.r2 < 0.9 || rep.fit_v2.r2 < 0.9;
  if (rep.low_confidence) rep.flags.emplace_back("low_confidence_fit");

  const PiecewiseLinearPotential d = q1 - q2;
  const AffinePiece& piece = d.piece(j1);
  rep.jump_true = piece(p1);
  rep.slope_true = piece.A[0] * nu[0] + piece.A[1] * nu[1] + piece.A[2] * nu[2];
  auto err = [](double est, double truth) {
    return std::abs(truth) > 1e-14 ? std::abs(est - truth) / std::abs(truth) : std::abs(est - truth);
  };
  rep.jump_error = err(rep.jump, rep.jump_true);
  rep.slope_error = err(rep.slope, rep.slope_true);
  return rep;
}

// ---------------------------------------------------------------------------- reconstruction

DataMisfit::DataMisfit(DomainPtr domain, std::shared_ptr<const BoundaryMetric> metric, const CauchySubspace& observed,
                       double e0)
    : domain_(std::move(domain)), metric_(std::move(metric)), observed_(observed), e0_(e0) {
  if (!domain_ || !metric_) throw std::invalid_argument("misfit needs a domain and a metric");
  if (observed_.pairs.empty() || observed_.pairs.size() != observed_.impedance.size()) {
    throw std::invalid_argument("observed space carries no generating pairs");
  }
  if (observed_.metric_hash != metric_->hash()) throw std::invalid_argument("observed space built with another metric");
  if (!(e0_ > 0.0)) throw std::invalid_argument("e0 must be positive");
  H_ = metric_->half_power();
  N_ = metric_->neg_half_power();
  for (const auto& p : observed_.pairs) observed_coords_.push_back(weighted_coordinates(*metric_, p));
}

DataMisfit DataMisfit::from_truth(DomainPtr domain, std::shared_ptr<const BoundaryMetric> metric,
                                  const PiecewiseLinearPotential& q_true, std::size_t m, double tau) {
  const CauchySubspace obs = generate_cauchy_space(domain, q_true, *metric, m, tau);
  const double e0 = q_true.e0_bound() > 0.0 ? q_true.e0_bound() : q_true.coeff_norm();
  return DataMisfit(std::move(domain), std::move(metric), obs, e0);
}

std::size_t DataMisfit::parameters() const {
  return domain_->spec().subdomains.size() * static_cast<std::size_t>(domain_->dim() + 1);
}

DataMisfit::State DataMisfit::evaluate(const std::vector<double>& theta) const {
  if (theta.size() != parameters()) throw std::invalid_argument("coefficient vector has the wrong length");
  State s;
  s.theta = theta;
  const auto q = PiecewiseLinearPotential::from_coefficients(dim(), theta, e0_);
  s.op = std::make_unique<DiscreteOperator>(domain_, q, BcDescriptor{Region::physical, observed_.tau});
  s.u = solve_generation_problems(*s.op, observed_.impedance);
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    CauchyPair p{sigma_trace(*domain_, s.u[k]), normal_derivative(*s.op, s.u[k])};
    s.residual.push_back(weighted_coordinates(*metric_, p) - observed_coords_[k]);
    s.value += s.residual.back().squaredNorm();
  }
  return s;
}

Eigen::VectorXcd DataMisfit::adjoint_source(const Eigen::VectorXcd& r) const {
  const Eigen::Index S = static_cast<Eigen::Index>(metric_->size());
  const cplx itm(0.0, observed_.tau * metric_->mass());
  return H_ * r.head(S) + itm * (N_ * r.tail(S));
}

ComplexField DataMisfit::potential_derivative(const State& s, std::size_t p, const ComplexField& v) const {
  const auto stride = static_cast<std::size_t>(dim() + 1);
  const int j = static_cast<int>(p / stride) + 1;
  const std::size_t c = p % stride;
  ComplexField out(domain_);
  const auto& w = s.op->weights();
  for (std::size_t n : s.op->active_nodes()) {
    if (domain_->subdomain(n) != j) continue;
    const double dq = c == 0 ? 1.0 : domain_->coords(n)[c - 1];
    out[n] = w[n] * dq * v[n];
  }
  return out;
}

std::vector<double> DataMisfit::gradient(const State& s) const {
  const auto& sig = domain_->sigma_nodes();
  std::vector<ComplexField> loads;
  for (const auto& r : s.residual) {
    const Eigen::VectorXcd src = adjoint_source(r);
    ComplexField l(domain_);
    for (std::size_t i = 0; i < sig.size(); ++i) l[sig[i]] = std::conj(src(static_cast<Eigen::Index>(i)));
    loads.push_back(std::move(l));
  }
  const auto y = s.op->solve_loads(loads);
  std::vector<double> grad(parameters(), 0.0);
  const auto& active = s.op->active_nodes();
  for (std::size_t p = 0; p < grad.size(); ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.u.size(); ++k) {
      const ComplexField du = potential_derivative(s, p, s.u[k]);
      const cplx t = kernels::blocked_sum<cplx>(active.size(), [&](std::size_t i) {
        const std::size_t n = active[i];
        return y[k][n] * du[n];
      });
      acc += t.real();
    }
    grad[p] = -2.0 * acc;
  }
  return grad;
}

Eigen::MatrixXd DataMisfit::jacobian(const State& s) const {
  const std::size_t P = parameters();
  const std::size_t K = s.u.size();
  const Eigen::Index S = static_cast<Eigen::Index>(metric_->size());
  const Eigen::Index rows = 2 * S * static_cast<Eigen::Index>(K);
  Eigen::MatrixXcd Jc(rows, static_cast<Eigen::Index>(P));
  const cplx itau(0.0, observed_.tau);
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<ComplexField> loads;
    for (std::size_t k = 0; k < K; ++k) {
      ComplexField l = potential_derivative(s, p, s.u[k]);
      for (auto& v : l.values) v = -v;
      loads.push_back(std::move(l));
    }
    const auto du = s.op->solve_loads(loads);
    for (std::size_t k = 0; k < K; ++k) {
      const auto f = sigma_trace(*domain_, du[k]);
      CauchyPair dp{f, f};
      for (auto& v : dp.g) v *= -itau;
      Jc.block(2 * S * static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p), 2 * S, 1) =
          weighted_coordinates(*metric_, dp);
    }
  }
  Eigen::MatrixXd J(2 * rows, static_cast<Eigen::Index>(P));
  J.topRows(rows) = Jc.real();
  J.bottomRows(rows) = Jc.imag();
  return J;
}

double DataMisfit::aperture_to_observed(const State& s) const {
  const Eigen::Index S2 = 2 * static_cast<Eigen::Index>(metric_->size());
  Eigen::MatrixXcd cols(S2, static_cast<Eigen::Index>(s.residual.size()));
  for (std::size_t k = 0; k < s.residual.size(); ++k) cols.col(static_cast<Eigen::Index>(k)) = s.residual[k] + observed_coords_[k];
  return aperture(subspace_from_columns(cols, metric_->hash()), observed_).value;
}

const char* to_string(StepPolicy p) {
  return p == StepPolicy::landweber ? "landweber" : "gauss_newton";
}

std::vector<double> project_coefficients(const std::vector<double>& theta, int dim, double e0) {
  const auto stride = static_cast<std::size_t>(dim + 1);
  if (theta.size() % stride != 0) throw std::invalid_argument("coefficient vector length is not a multiple of dim+1");
  std::vector<double> out = theta;
  for (std::size_t j = 0; j < theta.size() / stride; ++j) {
    double* b = out.data() + j * stride;
    double g2 = 0.0;
    for (std::size_t a = 1; a < stride; ++a) g2 += b[a] * b[a];
    const double s = std::abs(b[0]), t = std::sqrt(g2);
    if (s + t <= e0 * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) continue;
    double s1 = s - 0.5 * (s + t - e0), t1 = t - 0.5 * (s + t - e0);
    if (s1 < 0.0) {
      s1 = 0.0;
      t1 = e0;
    } else if (t1 < 0.0) {
      s1 = e0;
      t1 = 0.0;
    }
    b[0] = std::copysign(s1, b[0]);
    for (std::size_t a = 1; a < stride; ++a) b[a] = t > 0.0 ? b[a] * (t1 / t) : 0.0;
  }
  return out;
}

double coefficient_error(const std::vector<double>& theta, const std::vector<double>& truth, int dim) {
  if (theta.size() != truth.size()) throw std::invalid_argument("coefficient vectors differ in length");
  std::vector<double> d(theta.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = theta[i] - truth[i];
  const double n = triple_norm(truth, dim);
  return n > 0.0 ? triple_norm(d, dim) / n : triple_norm(d, dim);
}

namespace {

void push_row(ReconstructionResult& res, const DataMisfit& f, const DataMisfit::State& s, int iter, double step,
              const std::vector<double>& truth, const ReconstructionOptions& opt) {
  TraceRow row;
  row.iter = iter;
  row.misfit = s.value;
  row.step = step;
  row.aperture = opt.trace_aperture ? f.aperture_to_observed(s) : kNaN;
  row.coeff_error = truth.empty() ? kNaN : coefficient_error(s.theta, truth, f.dim());
  res.trace.push_back(row);
}

std::vector<double> axpy(const std::vector<double>& x, double a, const Eigen::VectorXd& d) {
  std::vector<double> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * d(static_cast<Eigen::Index>(i));
  return y;
}

Eigen::VectorXd stacked_residual(const DataMisfit::State& s) {
  Eigen::Index len = 0;
  for (const auto& r : s.residual) len += r.size();
  Eigen::VectorXd out(2 * len);
  Eigen::Index o = 0;
  for (const auto& r : s.residual) {
    out.segment(o, r.size()) = r.real();
    out.segment(len + o, r.size()) = r.imag();
    o += r.size();
  }
  return out;
}

double power_iteration(const Eigen::MatrixXd& M, int iterations) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.rows()).normalized();
  double lam = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Eigen::VectorXd w = M * v;
    lam = v.dot(w);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
  }
  return lam;
}

}  // namespace

ReconstructionResult reconstruct(const DataMisfit& f, std::vector<double> theta0, const std::vector<double>& truth,
                                 const ReconstructionOptions& opt) {
  if (opt.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  const int dim = f.dim();
  ReconstructionResult res;
  DataMisfit::State state = f.evaluate(project_coefficients(theta0, dim, f.e0()));
  const double j0 = state.value;
  push_row(res, f, state, 0, 0.0, truth, opt);
  auto done = [&](double v) { return v <= opt.misfit_tol || v <= opt.relative_tol * j0; };

  if (done(state.value)) {
    res.converged = true;
    res.reason = "misfit below tolerance";
  } else if (opt.policy == StepPolicy::landweber) {
    const Eigen::MatrixXd J = f.jacobian(state);
    res.lipschitz = power_iteration(J.transpose() * J, opt.power_iterations);
    if (!(res.lipschitz > 0.0)) throw std::runtime_error("vanishing Jacobian at the initial guess");
    double omega = 1.0 / res.lipschitz;
    int increases = 0;
    for (int it = 1; it <= opt.iterations; ++it) {
      res.iterations = it;
      const auto g = f.gradient(state);
      if (euclid(g) == 0.0) {
        res.converged = true;
        res.reason = "zero gradient";
        break;
      }
      std::vector<double> cand = state.theta;
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] -= 0.5 * omega * g[i];
      DataMisfit::State next = f.evaluate(project_coefficients(cand, dim, f.e0()));
      if (next.value > state.value) {
        omega *= 0.5;
        if (++increases >= opt.max_increases) {
          res.aborted = true;
          res.reason = "misfit increased on consecutive steps";
          break;
        }
        continue;
      }
      increases = 0;
      std::vector<double> d(cand.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = next.theta[i] - state.theta[i];
      state = std::move(next);
      push_row(res, f, state, it, euclid(d), truth, opt);
      if (done(state.value)) {
        res.converged = true;
        res.reason = "misfit below tolerance";
        break;
      }
    }
  } else {
    for (int it = 1; it <= opt.iterations; ++it) {
      res.iterations = it;
      const Eigen::MatrixXd J = f.jacobian(state);
      const Eigen::VectorXd r = stacked_residual(state);
      Eigen::VectorXd scale = J.colwise().norm().transpose();
      for (Eigen::Index i = 0; i < scale.size(); ++i) scale(i) = scale(i) > 0.0 ? 1.0 / scale(i) : 1.0;
      const Eigen::MatrixXd Js = J * scale.asDiagonal();
      const Eigen::VectorXd z = Js.colPivHouseholderQr().solve(-r);
      const Eigen::VectorXd delta = scale.asDiagonal() * z;
      bool accepted = false;
      double t = 1.0;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        DataMisfit::State next = f.evaluate(project_coefficients(axpy(state.theta, t, delta), dim, f.e0()));
        if (next.value < state.value) {
          std::vector<double> d(next.theta.size());
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = next.theta[i] - state.theta[i];
          const double step = euclid(d);
          state = std::move(next);
          push_row(res, f, state, it, step, truth, opt);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        res.converged = true;
        res.reason = "no decrease along the Gauss-Newton direction";
        break;
      }
      if (done(state.value)) {
        res.converged = true;
        res.reason = "misfit below tolerance";
        break;
      }
      if (res.trace.back().step <= opt.step_tol * (1.0 + euclid(state.theta))) {
        res.converged = true;
        res.reason = "step below tolerance";
        break;
      }
    }
  }
  if (!res.converged && !res.aborted) res.reason = "iteration limit";
  res.theta = state.theta;
  res.coeff_error = truth.empty() ? kNaN : coefficient_error(res.theta, truth, dim);
  return res;
}

}  // namespace lipstab
