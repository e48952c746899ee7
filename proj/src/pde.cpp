#include "lipstab/pde.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "lipstab/kernels.hpp"

namespace lipstab {

bool ComplexField::finite() const {
  for (const auto& v : values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

double ComplexField::max_abs() const {
  return kernels::blocked_max(values.size(), [&](std::size_t i) { return std::abs(values[i]); });
}

ComplexField operator+(const ComplexField& a, const ComplexField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("field size mismatch");
  ComplexField r(a.domain);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

ComplexField operator-(const ComplexField& a, const ComplexField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("field size mismatch");
  ComplexField r(a.domain);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

LoadSolver::LoadSolver(DomainPtr domain, std::vector<double> q_nodes, BcDescriptor bc)
    : domain_(std::move(domain)), bc_(bc), q_(std::move(q_nodes)) {
  if (!domain_) throw std::invalid_argument("null domain");
  const GridDomain& g = *domain_;
  const std::size_t nn = g.node_count();
  if (q_.size() != nn) throw std::invalid_argument("potential samples do not match the grid");
  const int d = g.dim();
  const double h = g.h();
  const double wd = std::pow(h, d);
  surface_w_ = std::pow(h, d - 1);
  stride_ = {1, g.counts()[0], static_cast<std::ptrdiff_t>(g.counts()[0]) * g.counts()[1]};

  active_.assign(nn, 0);
  impedance_.assign(nn, 0);
  closure_.assign(nn, 0);
  weights_.assign(nn, 0.0);
  switch (bc_.region) {
    case Region::augmented:
      imp_plane_ = g.sigma0_plane();
      break;
    case Region::physical:
      imp_plane_ = g.sigma_plane();
      break;
    case Region::dirichlet:
      imp_plane_ = -1;
      break;
  }
  for (std::size_t n = 0; n < nn; ++n) {
    const NodeClass c = g.node_class(n);
    bool act = false;
    bool imp = false;
    bool clo = false;
    switch (bc_.region) {
      case Region::augmented:
        act = g.active_augmented(n);
        imp = c == NodeClass::impedance_boundary;
        clo = c != NodeClass::exterior;
        break;
      case Region::physical:
        act = g.active_physical(n);
        imp = c == NodeClass::accessible_boundary;
        clo = g.in_omega_closure(n);
        break;
      case Region::dirichlet:
        act = g.active_physical(n) && c != NodeClass::accessible_boundary;
        clo = g.in_omega_closure(n);
        break;
    }
    active_[n] = act ? 1 : 0;
    impedance_[n] = (act && imp) ? 1 : 0;
    closure_[n] = clo ? 1 : 0;
    if (act) {
      active_nodes_.push_back(n);
      weights_[n] = imp ? 0.5 * wd : wd;
      if (imp) impedance_nodes_.push_back(n);
    }
  }
}

double LoadSolver::edge_weight(std::size_t n, int axis) const {
  const GridDomain& g = *domain_;
  const Index3 p = g.ijk(n);
  if (p[axis] + 1 >= g.counts()[axis]) return 0.0;
  const std::size_t m = n + static_cast<std::size_t>(stride_[axis]);
  if (!closure_[n] || !closure_[m] || !(active_[n] || active_[m])) return 0.0;
  double w = std::pow(g.h(), g.dim() - 2);
  if (imp_plane_ >= 0 && axis != g.normal_axis() && p[g.normal_axis()] == imp_plane_) w *= 0.5;
  return w;
}

void LoadSolver::check_conforming(const ComplexField& f) const {
  if (f.size() != domain_->node_count()) throw std::invalid_argument("field does not conform to the operator's grid");
}

ComplexField LoadSolver::apply_impl(const ComplexField& v, bool with_impedance) const {
  check_conforming(v);
  const GridDomain& g = *domain_;
  const int d = g.dim();
  const double he = std::pow(g.h(), d - 2);
  const int na = g.normal_axis();
  ComplexField out(domain_);
  const auto nact = static_cast<std::ptrdiff_t>(active_nodes_.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < nact; ++t) {
    const std::size_t n = active_nodes_[static_cast<std::size_t>(t)];
    const Index3 p = g.ijk(n);
    const cplx vn = v[n];
    cplx s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double w = (imp_plane_ >= 0 && a != na && p[na] == imp_plane_) ? 0.5 * he : he;
      if (p[a] + 1 < g.counts()[a]) {
        const std::size_t m = n + static_cast<std::size_t>(stride_[a]);
        if (closure_[m]) s += w * ((active_[m] ? v[m] : cplx(0.0)) - vn);
      }
      if (p[a] > 0) {
        const std::size_t m = n - static_cast<std::size_t>(stride_[a]);
        if (closure_[m]) s += w * ((active_[m] ? v[m] : cplx(0.0)) - vn);
      }
    }
    s += weights_[n] * q_[n] * vn;
    if (with_impedance && impedance_[n]) s -= cplx(0.0, bc_.tau * surface_w_) * vn;
    out[n] = s;
  }
  return out;
}

ComplexField LoadSolver::apply(const ComplexField& v) const { return apply_impl(v, true); }

ComplexField LoadSolver::apply_without_impedance(const ComplexField& v) const { return apply_impl(v, false); }

std::vector<ComplexField> LoadSolver::solve_loads(std::span<const ComplexField> loads) const {
  std::vector<ComplexField> out(loads.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(loads.size()); ++k) {
    out[static_cast<std::size_t>(k)] = solve_load(loads[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<ComplexField> LoadSolver::solve_loads_serial(std::span<const ComplexField> loads) const {
  std::vector<ComplexField> out;
  out.reserve(loads.size());
  for (const auto& l : loads) out.push_back(solve_load(l));
  return out;
}

ComplexField LoadSolver::solve(const ComplexField& f) const {
  check_conforming(f);
  ComplexField load(domain_);
  for (std::size_t n : active_nodes_) load[n] = weights_[n] * f[n];
  return solve_load(load);
}

double LoadSolver::gradient_energy(const ComplexField& v) const {
  check_conforming(v);
  const GridDomain& g = *domain_;
  const int d = g.dim();
  return kernels::blocked_sum<double>(g.node_count(), [&](std::size_t n) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double w = edge_weight(n, a);
      if (w == 0.0) continue;
      const std::size_t m = n + static_cast<std::size_t>(stride_[a]);
      const cplx vn = active_[n] ? v[n] : cplx(0.0);
      const cplx vm = active_[m] ? v[m] : cplx(0.0);
      s += w * std::norm(vm - vn);
    }
    return s;
  });
}

double LoadSolver::boundary_mass(const ComplexField& v) const {
  check_conforming(v);
  return kernels::blocked_sum<double>(impedance_nodes_.size(),
                                      [&](std::size_t i) { return surface_w_ * std::norm(v[impedance_nodes_[i]]); });
}

cplx LoadSolver::weighted_inner(const ComplexField& a, const ComplexField& b) const {
  check_conforming(a);
  check_conforming(b);
  return kernels::blocked_sum<cplx>(active_nodes_.size(), [&](std::size_t i) {
    const std::size_t n = active_nodes_[i];
    return weights_[n] * a[n] * std::conj(b[n]);
  });
}

double LoadSolver::potential_energy(const ComplexField& v) const {
  check_conforming(v);
  return kernels::blocked_sum<double>(active_nodes_.size(), [&](std::size_t i) {
    const std::size_t n = active_nodes_[i];
    return weights_[n] * q_[n] * std::norm(v[n]);
  });
}

double LoadSolver::residual(const ComplexField& v, const ComplexField& load) const {
  const ComplexField av = apply(v);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t n : active_nodes_) {
    num += std::norm(av[n] - load[n]);
    den += std::norm(load[n]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

DiscreteOperator::DiscreteOperator(DomainPtr domain, std::vector<double> q_nodes, BcDescriptor bc, bool factorize)
    : LoadSolver(std::move(domain), std::move(q_nodes), bc) {
  assemble();
  if (factorize) {
    lu_ = std::make_unique<Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(matrix_);
    lu_->factorize(matrix_);
    if (lu_->info() != Eigen::Success) throw std::runtime_error("sparse factorization failed: " + lu_->lastErrorMessage());
  }
}

namespace {

std::vector<double> potential_for_region(const GridDomain& g, const PiecewiseLinearPotential& q, Region r) {
  if (r == Region::augmented && !q.extended()) return sample_nodes(extend_to_omega0(q, g), g);
  return sample_nodes(q, g);
}

}  // namespace

DiscreteOperator::DiscreteOperator(DomainPtr domain, const PiecewiseLinearPotential& q, BcDescriptor bc, bool factorize)
    : DiscreteOperator(domain, potential_for_region(*domain, q, bc.region), bc, factorize) {}

void DiscreteOperator::assemble() {
  const GridDomain& g = *domain_;
  const int d = g.dim();
  dof_.assign(g.node_count(), -1);
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) dof_[active_nodes_[k]] = static_cast<std::ptrdiff_t>(k);
  std::vector<Eigen::Triplet<cplx, int>> trip;
  trip.reserve(active_nodes_.size() * static_cast<std::size_t>(2 * d + 1));
  std::vector<cplx> diag(active_nodes_.size(), 0.0);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    for (int a = 0; a < d; ++a) {
      const double w = edge_weight(n, a);
      if (w == 0.0) continue;
      const std::size_t m = n + static_cast<std::size_t>(stride_[a]);
      const auto dn = dof_[n];
      const auto dm = dof_[m];
      if (dn >= 0) diag[static_cast<std::size_t>(dn)] -= w;
      if (dm >= 0) diag[static_cast<std::size_t>(dm)] -= w;
      if (dn >= 0 && dm >= 0) {
        trip.emplace_back(static_cast<int>(dn), static_cast<int>(dm), w);
        trip.emplace_back(static_cast<int>(dm), static_cast<int>(dn), w);
      }
    }
  }
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) {
    const std::size_t n = active_nodes_[k];
    cplx v = diag[k] + weights_[n] * q_[n];
    if (impedance_[n]) v -= cplx(0.0, bc_.tau * surface_w_);
    trip.emplace_back(static_cast<int>(k), static_cast<int>(k), v);
  }
  const auto nd = static_cast<int>(active_nodes_.size());
  matrix_.resize(nd, nd);
  matrix_.setFromTriplets(trip.begin(), trip.end());
  matrix_.makeCompressed();
}

ComplexField DiscreteOperator::solve_load(const ComplexField& load) const {
  check_conforming(load);
  if (!lu_) throw std::logic_error("operator was assembled without factorization");
  Eigen::VectorXcd b(static_cast<Eigen::Index>(active_nodes_.size()));
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) b[static_cast<Eigen::Index>(k)] = load[active_nodes_[k]];
  const Eigen::VectorXcd x = lu_->solve(b);
  ComplexField out(domain_);
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) out[active_nodes_[k]] = x[static_cast<Eigen::Index>(k)];
  return out;
}

double DiscreteOperator::smallest_singular_value(int iterations) const {
  if (!lu_) throw std::logic_error("operator was assembled without factorization");
  const auto n = static_cast<Eigen::Index>(active_nodes_.size());
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = cplx(u(rng), u(rng));
  x.normalize();
  double growth = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXcd y = lu_->solve(x);
    // A is complex symmetric, so A^{-H} z = conj(A^{-1} conj(z)).
    const Eigen::VectorXcd z = lu_->solve(Eigen::VectorXcd(y.conjugate())).conjugate();
    growth = z.norm();
    x = z / growth;
  }
  return 1.0 / std::sqrt(growth);
}

double DiscreteOperator::norm_inf() const {
  Eigen::VectorXd rs = Eigen::VectorXd::Zero(matrix_.rows());
  for (int k = 0; k < matrix_.outerSize(); ++k) {
    for (Matrix::InnerIterator it(matrix_, k); it; ++it) rs[it.row()] += std::abs(it.value());
  }
  return rs.maxCoeff();
}

std::unique_ptr<DiscreteOperator> assemble(DomainPtr domain, const PiecewiseLinearPotential& q, BcDescriptor bc) {
  return std::make_unique<DiscreteOperator>(std::move(domain), q, bc);
}

ComplexField solve_generation_problem(const LoadSolver& physical, std::span<const cplx> g) {
  std::vector<std::vector<cplx>> one{std::vector<cplx>(g.begin(), g.end())};
  return std::move(solve_generation_problems(physical, one).front());
}

std::vector<ComplexField> solve_generation_problems(const LoadSolver& physical,
                                                    const std::vector<std::vector<cplx>>& data) {
  if (physical.bc().region != Region::physical) throw std::invalid_argument("generation needs the physical operator");
  const auto& sigma = physical.domain().sigma_nodes();
  std::vector<ComplexField> loads;
  loads.reserve(data.size());
  for (const auto& g : data) {
    if (g.size() != sigma.size()) throw std::invalid_argument("boundary datum does not match Sigma");
    ComplexField load(physical.domain_ptr());
    for (std::size_t k = 0; k < sigma.size(); ++k) load[sigma[k]] = -physical.surface_weight() * g[k];
    loads.push_back(std::move(load));
  }
  return physical.solve_loads(loads);
}

std::vector<cplx> normal_derivative(const LoadSolver& physical, const ComplexField& u) {
  const ComplexField a0 = physical.apply_without_impedance(u);
  const auto& sigma = physical.domain().sigma_nodes();
  std::vector<cplx> g(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) g[k] = -a0[sigma[k]] / physical.surface_weight();
  return g;
}

std::vector<cplx> sigma_trace(const GridDomain& domain, const ComplexField& u) {
  const auto& sigma = domain.sigma_nodes();
  std::vector<cplx> f(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) f[k] = u[sigma[k]];
  return f;
}

}  // namespace lipstab
