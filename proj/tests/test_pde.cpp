#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "lipstab/fixtures.hpp"
#include "lipstab/layered.hpp"
#include "lipstab/pde.hpp"

using namespace lipstab;

namespace {

PiecewiseLinearPotential half_cube_potential(int dim, double a1, double a2, double s1 = 0.0, double s2 = 0.0) {
  std::vector<AffinePiece> p(2);
  p[0].a = a1;
  p[1].a = a2;
  p[0].A[dim - 1] = s1;
  p[1].A[dim - 1] = s2;
  return {dim, p, 4.0};
}

ComplexField random_density(const LoadSolver& op, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexField f(op.domain_ptr());
  for (std::size_t n : op.active_nodes()) f[n] = u(rng);
  return f;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST_CASE("interior row is the sum of 1-D (1,-2,1) stencils at h=1") {
  DomainSpec s = fixtures::unit_box(2, 3.0);
  s.omega.hi = {4.0, 4.0, 0.0};
  s.subdomains = {s.omega};
  s.d0_thickness = 2.0;
  auto dom = make_domain(s, 1.0);
  DiscreteOperator op(dom, std::vector<double>(dom->node_count(), 0.0), BcDescriptor{Region::augmented, 1.0}, false);
  const std::size_t n = dom->nearest_node({2.0, 2.0, 0.0});
  const auto row = op.dof(n);
  REQUIRE(row >= 0);
  const Eigen::MatrixXcd A(op.matrix());
  CHECK(A(row, row) == cplx(-4.0, 0.0));
  int ones = 0;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    if (j != row && A(row, j) != cplx(0.0)) {
      CHECK(A(row, j) == cplx(1.0, 0.0));
      ++ones;
    }
  }
  CHECK(ones == 4);
}

TEST_CASE("Laplacian of the constant field vanishes away from the Dirichlet boundary") {
  auto dom = make_domain(fixtures::unit_box(3), 1.0 / 8);
  DiscreteOperator op(dom, std::vector<double>(dom->node_count(), 0.0), BcDescriptor{Region::dirichlet, 1.0}, false);
  ComplexField one(dom);
  for (std::size_t n : op.active_nodes()) one[n] = 1.0;
  const ComplexField r = op.apply(one);
  for (std::size_t n : op.active_nodes()) {
    const Index3 p = dom->ijk(n);
    bool near = false;
    for (int a = 0; a < 3; ++a) {
      const int lo = a == 2 ? dom->sigma_plane() : 0;
      const int hi = a == 2 ? dom->counts()[2] - 1 : dom->counts()[a] - 1;
      near = near || p[a] == lo + 1 || p[a] == hi - 1;
    }
    if (near) {
      CHECK(r[n].real() < 0.0);
    } else {
      CHECK(r[n] == cplx(0.0));
    }
  }
}

TEST_CASE("matrix is complex symmetric but not Hermitian") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 1.0, -1.0, 0.5, 0.3), BcDescriptor{}, false);
  const DiscreteOperator::Matrix& A = op.matrix();
  const DiscreteOperator::Matrix At = A.transpose();
  CHECK((A - At).norm() == 0.0);
  const DiscreteOperator::Matrix Ah = A.adjoint();
  CHECK((A - Ah).norm() > 0.0);
}

TEST_CASE("real part with q=0 is negative semidefinite") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, std::vector<double>(dom->node_count(), 0.0), BcDescriptor{}, false);
  const Eigen::SparseMatrix<double> R = op.matrix().real();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd x(R.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = nd(rng);
    CHECK(x.dot(R * x) <= 0.0);
  }
}

TEST_CASE("zero source gives zero solution; solves meet the residual bound") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 1.0, -1.0), BcDescriptor{});
  ComplexField z(dom);
  CHECK(op.solve(z).max_abs() == 0.0);
  const ComplexField f = random_density(op, 1);
  ComplexField load(dom);
  for (std::size_t n : op.active_nodes()) load[n] = op.weights()[n] * f[n];
  CHECK(op.residual(op.solve_load(load), load) <= 1e-10);
}

TEST_CASE("energy identities of the well-posedness argument") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 1.5, -2.0, 0.5, -0.5), BcDescriptor{});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ComplexField f = random_density(op, 100 + s);
    const ComplexField v = op.solve(f);
    const cplx fv = op.weighted_inner(f, v);
    CHECK(rel(op.boundary_mass(v), -fv.imag()) <= 1e-9);
    CHECK(rel(op.gradient_energy(v), -fv.real() + op.potential_energy(v)) <= 1e-9);
  }
}

TEST_CASE("solve map is complex symmetric (unconjugated reciprocity)") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 0.7, -1.2), BcDescriptor{});
  const ComplexField f1 = random_density(op, 5);
  const ComplexField f2 = random_density(op, 6);
  const ComplexField v1 = op.solve(f1);
  const ComplexField v2 = op.solve(f2);
  cplx a = 0.0, b = 0.0;
  for (std::size_t n : op.active_nodes()) {
    a += op.weights()[n] * f1[n] * v2[n];
    b += op.weights()[n] * f2[n] * v1[n];
  }
  CHECK(std::abs(a - b) <= 1e-10 * std::abs(a));
}

TEST_CASE("generation problem: zero data, impulse decay, reciprocity, impedance identity") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 0.0, 0.0), BcDescriptor{Region::physical, 1.0});
  const auto& sigma = dom->sigma_nodes();
  std::vector<cplx> g(sigma.size(), 0.0);
  CHECK(solve_generation_problem(op, g).max_abs() == 0.0);

  const std::size_t center = dom->nearest_node({0.5, 0.5, 0.0});
  const auto ic = static_cast<std::size_t>(std::find(sigma.begin(), sigma.end(), center) - sigma.begin());
  REQUIRE(ic < sigma.size());
  g[ic] = 1.0;
  const ComplexField u = solve_generation_problem(op, g);
  double prev = std::abs(u[center]);
  for (int k = 1; k < 8; ++k) {
    const double cur = std::abs(u[dom->nearest_node({0.5, 0.5, k / 8.0})]);
    CHECK(cur < prev);
    prev = cur;
  }
  // normal derivative identity d_nu u = g - i u
  const auto dn = normal_derivative(op, u);
  const auto tr = sigma_trace(*dom, u);
  for (std::size_t k = 0; k < sigma.size(); ++k) CHECK(std::abs(dn[k] - (g[k] - cplx(0, 1) * tr[k])) <= 1e-12);

  const std::size_t ib = ic + 3;
  std::vector<cplx> gb(sigma.size(), 0.0);
  gb[ib] = 1.0;
  const ComplexField ub = solve_generation_problem(op, gb);
  CHECK(std::abs(ub[sigma[ic]] - u[sigma[ib]]) <= 1e-10 * std::abs(u[sigma[ib]]));
}

TEST_CASE("manufactured solution converges at second order") {
  // u = sin(pi x) sin(pi y) phi(z) with phi(ztop) = 0 and -phi'(z0) + i phi(z0) = 0, q = 1.
  const double z0 = -0.75, zt = 1.0, L = zt - z0;
  const cplx c0 = 1.0;
  const cplx c1 = c0 * cplx(1.0, L) / L;
  auto phi = [&](double z) { return (zt - z) * (c0 + c1 * (z - z0)); };
  const cplx phi2 = -2.0 * c1;
  const double pi = std::numbers::pi;
  std::vector<double> errs;
  for (int inv : {8, 16}) {
    auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / inv);
    DiscreteOperator op(dom, std::vector<double>(dom->node_count(), 1.0), BcDescriptor{});
    ComplexField f(dom);
    for (std::size_t n : op.active_nodes()) {
      const Vec x = dom->coords(n);
      const double s = std::sin(pi * x[0]) * std::sin(pi * x[1]);
      f[n] = s * ((1.0 - 2.0 * pi * pi) * phi(x[2]) + phi2);
    }
    const ComplexField v = op.solve(f);
    double e = 0.0;
    for (std::size_t n : op.active_nodes()) {
      const Vec x = dom->coords(n);
      e = std::max(e, std::abs(v[n] - std::sin(pi * x[0]) * std::sin(pi * x[1]) * phi(x[2])));
    }
    errs.push_back(e);
  }
  const double order = std::log2(errs[0] / errs[1]);
  CHECK(order >= 1.7);
  CHECK(order <= 2.3);
}

TEST_CASE("mixed operator stays invertible where the Dirichlet problem is singular") {
  const double h = 1.0 / 8;
  auto dom = make_domain(fixtures::unit_box(3), h);
  const double s = std::sin(std::numbers::pi * h / 2.0);
  const double lambda1 = 3.0 * 4.0 / (h * h) * s * s;
  std::vector<AffinePiece> p(1);
  p[0].a = lambda1;
  const PiecewiseLinearPotential q(3, p, lambda1);
  DiscreteOperator dir(dom, q, BcDescriptor{Region::dirichlet, 1.0});
  const double sd = dir.smallest_singular_value();
  CHECK(sd < 1e-8 * dir.norm_inf());
  DiscreteOperator mixed(dom, q, BcDescriptor{Region::augmented, 1.0});
  const double sm = mixed.smallest_singular_value();
  CHECK(sm > 1e-4 * mixed.norm_inf());
  DiscreteOperator phys(dom, q, BcDescriptor{Region::physical, 1.0});
  CHECK(phys.smallest_singular_value() > 1e-4 * phys.norm_inf());
}

TEST_CASE("parallel and serial multi-load solves agree bit for bit") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  DiscreteOperator op(dom, half_cube_potential(3, 1.0, 0.5), BcDescriptor{});
  std::vector<ComplexField> loads;
  for (std::uint64_t s = 0; s < 6; ++s) loads.push_back(random_density(op, 40 + s));
  const auto a = op.solve_loads(loads);
  const auto b = op.solve_loads_serial(loads);
  for (std::size_t k = 0; k < loads.size(); ++k) CHECK(a[k].values == b[k].values);
}

TEST_CASE("layered solver reproduces the sparse LU solution") {
  for (int dim : {2, 3}) {
    auto dom = make_domain(fixtures::two_half_cube(dim), 1.0 / 8);
    const auto q = extend_to_omega0(half_cube_potential(dim, 1.0, -1.5, 0.7, -0.4), *dom);
    DiscreteOperator sparse(dom, q, BcDescriptor{});
    LayeredSolver fast(dom, q);
    const ComplexField f = random_density(sparse, 9);
    const ComplexField a = sparse.solve(f);
    const ComplexField b = fast.solve(f);
    CHECK((a - b).max_abs() <= 1e-11 * a.max_abs());
    ComplexField load(dom);
    for (std::size_t n : fast.active_nodes()) load[n] = fast.weights()[n] * f[n];
    CHECK(fast.residual(b, load) <= 1e-10);
  }
}

TEST_CASE("layered solver refuses lateral variation") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  std::vector<AffinePiece> p(2);
  p[0].A = {1.0, 0.0, 0.0};
  const PiecewiseLinearPotential q(3, p, 2.0);
  std::string why;
  CHECK_FALSE(LayeredSolver::supports(*dom, sample_nodes(extend_to_omega0(q, *dom), *dom), &why));
  CHECK(why == "potential varies within a plane");
  CHECK(dynamic_cast<DiscreteOperator*>(make_augmented_solver(dom, q).get()) != nullptr);
}
