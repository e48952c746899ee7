#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "lipstab/cauchy.hpp"
#include "lipstab/fixtures.hpp"

using namespace lipstab;

namespace {

PiecewiseLinearPotential pot(double a1, double a2, double s = 0.0) {
  std::vector<AffinePiece> p(2);
  p[0].a = a1;
  p[0].A = {0.3 * s, -0.2 * s, 0.5 * s};
  p[1].a = a2;
  p[1].A = {0.2 * s, 0.1 * s, -0.3 * s};
  return {3, p, 3.0};
}

Eigen::MatrixXcd random_cols(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  Eigen::MatrixXcd M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = cplx(n(rng), n(rng));
  return M;
}

}  // namespace

TEST_CASE("boundary metric eigenpairs against a dense generalized eigensolve") {
  for (int dim : {2, 3}) {
    auto dom = make_domain(fixtures::two_half_cube(dim), 1.0 / 8);
    BoundaryMetric bm(*dom);
    CHECK(bm.size() == (dim == 3 ? 49u : 7u));
    const Eigen::MatrixXd K = bm.stiffness();
    const Eigen::MatrixXd& U = bm.eigenvectors();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(U.cols(), U.cols());
    CHECK((U.transpose() * U - I).norm() <= 1e-12);
    CHECK((K * U - bm.mass() * U * bm.eigenvalues().asDiagonal()).norm() <= 1e-10 * K.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K / bm.mass());
    CHECK((es.eigenvalues() - bm.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-10 * bm.eigenvalues().maxCoeff());
    CHECK(bm.eigenvalues().minCoeff() >= 0.0);
    CHECK((bm.half_power() * bm.neg_half_power() - I).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("degenerate eigenvalues follow wavenumber order; hash ignores the order") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric a(*dom, TieOrder::lexicographic);
  BoundaryMetric b(*dom, TieOrder::reversed);
  CHECK(a.wavenumbers()[1] == std::array<int, 2>{1, 2});
  CHECK(a.wavenumbers()[2] == std::array<int, 2>{2, 1});
  CHECK(b.wavenumbers()[1] == std::array<int, 2>{2, 1});
  CHECK(a.eigenvalues()(1) == doctest::Approx(a.eigenvalues()(2)));
  CHECK(a.hash() == b.hash());
  BoundaryMetric c(*make_domain(fixtures::two_half_cube(3), 1.0 / 16));
  CHECK(c.hash() != a.hash());
}

TEST_CASE("pair_norm: zero, lowest eigenfunction, homogeneity, dense oracle") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  const std::size_t S = bm.size();
  CauchyPair zero{std::vector<cplx>(S), std::vector<cplx>(S)};
  CHECK(pair_norm(bm, zero) == 0.0);
  CauchyPair phi{bm.eigenfunction(0), std::vector<cplx>(S)};
  CHECK(pair_norm(bm, phi) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-13));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  CauchyPair p{std::vector<cplx>(S), std::vector<cplx>(S)};
  for (std::size_t i = 0; i < S; ++i) {
    p.f[i] = cplx(n(rng), n(rng));
    p.g[i] = cplx(n(rng), n(rng));
  }
  CauchyPair p5 = p;
  for (std::size_t i = 0; i < S; ++i) {
    p5.f[i] *= cplx(3, 4);
    p5.g[i] *= cplx(3, 4);
  }
  CHECK(pair_norm(bm, p5) == doctest::Approx(5.0 * pair_norm(bm, p)).epsilon(1e-13));

  // ||f||^2 = f^H M (I + K / (m lambda_1))^{1/2} f and ||g||^2 = (M g)^H [M (I + ...)^{1/2}]^{-1} (M g)
  // from a dense eigensolve of the stiffness matrix.
  const double m = bm.mass();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bm.stiffness() / m);
  const Eigen::VectorXd lam = es.eigenvalues() / es.eigenvalues()(0);
  const Eigen::MatrixXd V = es.eigenvectors();
  const Eigen::MatrixXd Bp = m * V * (1.0 + lam.array()).sqrt().matrix().asDiagonal() * V.transpose();
  const Eigen::MatrixXd Bm = V * (1.0 + lam.array()).rsqrt().matrix().asDiagonal() * V.transpose() / m;
  const Eigen::VectorXcd f = Eigen::Map<const Eigen::VectorXcd>(p.f.data(), static_cast<Eigen::Index>(S));
  const Eigen::VectorXcd g = Eigen::Map<const Eigen::VectorXcd>(p.g.data(), static_cast<Eigen::Index>(S)) * m;
  const double oracle = std::sqrt(std::real(f.dot(Bp.cast<cplx>() * f)) + std::real(g.dot(Bm.cast<cplx>() * g)));
  CHECK(pair_norm(bm, p) == doctest::Approx(oracle).epsilon(1e-11));

  CauchyPair bad{std::vector<cplx>(S - 1), std::vector<cplx>(S)};
  CHECK_THROWS(pair_norm(bm, bad));
}

TEST_CASE("generation: boundary identity, orthonormal basis, bounds on m") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  const auto q0 = pot(0.0, 0.0);
  const CauchySubspace s1 = generate_cauchy_space(dom, q0, bm, 1);
  CHECK(s1.rank() == 1);
  const auto& pr = s1.pairs[0];
  double worst = 0.0;
  for (std::size_t i = 0; i < bm.size(); ++i) worst = std::max(worst, std::abs(pr.g[i] - (s1.impedance[0][i] - cplx(0, 1) * pr.f[i])));
  double scale = 0.0;
  for (const cplx& v : s1.impedance[0]) scale = std::max(scale, std::abs(v));
  CHECK(worst <= 1e-10 * scale);

  const CauchySubspace s = generate_cauchy_space(dom, pot(1.0, -0.5, 1.0), bm, 12);
  const Eigen::MatrixXcd G = s.basis.adjoint() * s.basis;
  CHECK((G - Eigen::MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s.dropped == 0);
  CHECK_THROWS(generate_cauchy_space(dom, q0, bm, 0));
  CHECK_THROWS(generate_cauchy_space(dom, q0, bm, bm.size() + 1));
}

TEST_CASE("degenerate ordering does not change the space once the cluster is covered") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric a(*dom, TieOrder::lexicographic);
  BoundaryMetric b(*dom, TieOrder::reversed);
  DiscreteOperator op(dom, pot(1.0, -0.5, 1.0), BcDescriptor{Region::physical});
  CHECK(aperture(generate_cauchy_space(op, a, 3), generate_cauchy_space(op, b, 3)).value <= 1e-10);
  // cutting the cluster does change it
  CHECK(aperture(generate_cauchy_space(op, a, 2), generate_cauchy_space(op, b, 2)).value > 1e-3);
}

TEST_CASE("identical operators give zero aperture; distinct ones do not") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  DiscreteOperator op1(dom, pot(1.0, -0.5, 1.0), BcDescriptor{Region::physical});
  DiscreteOperator op1b(dom, pot(1.0, -0.5, 1.0), BcDescriptor{Region::physical});
  DiscreteOperator op2(dom, pot(1.2, -0.5, 1.0), BcDescriptor{Region::physical});
  for (std::size_t m : {1u, 5u, 20u}) {
    CHECK(aperture(generate_cauchy_space(op1, bm, m), generate_cauchy_space(op1b, bm, m)).value <= 1e-10);
    CHECK(aperture(generate_cauchy_space(op1, bm, m), generate_cauchy_space(op2, bm, m)).value > 1e-6);
  }
}

TEST_CASE("nestedness and coincidence of the one-sided gaps") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  DiscreteOperator op1(dom, pot(1.0, -0.5, 1.0), BcDescriptor{Region::physical});
  DiscreteOperator op2(dom, pot(0.4, 0.7, -1.0), BcDescriptor{Region::physical});
  const auto small = generate_cauchy_space(op1, bm, 5);
  const auto large = generate_cauchy_space(op1, bm, 10);
  CHECK(one_sided(large, small) <= 1e-10);
  CHECK(one_sided(small, large) > 0.1);
  const auto other = generate_cauchy_space(op2, bm, 10);
  const auto r = aperture(large, other);
  CHECK(r.gap_12 < 1.0);
  CHECK(std::abs(r.gap_12 - r.gap_21) <= 1e-10);
  CHECK(!r.unequal_dims);
  CHECK(aperture(other, large).value == doctest::Approx(r.value).epsilon(1e-14));
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 1.0);
}

TEST_CASE("m-stabilization of the distance on the two-half-cube fixture") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  DiscreteOperator op1(dom, pot(1.0, -0.5, 1.0), BcDescriptor{Region::physical});
  DiscreteOperator op2(dom, pot(1.1, -0.4, 1.0), BcDescriptor{Region::physical});
  const auto rep = distance_with_stabilization(op1, op2, bm, 10);
  CHECK(rep.at_m.value > 0.0);
  CHECK(rep.rel_change <= 0.05);
  CHECK(rep.stable);
  const auto same = distance_with_stabilization(op1, op1, bm, 10);
  CHECK(same.at_2m.value <= 1e-10);
  CHECK(same.rel_change == 0.0);
}

TEST_CASE("toy apertures") {
  Eigen::MatrixXcd e1 = Eigen::MatrixXcd::Zero(2, 1), e2 = Eigen::MatrixXcd::Zero(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  const auto s1 = subspace_from_columns(e1);
  CHECK(aperture(s1, s1).value == 0.0);
  CHECK(aperture(s1, subspace_from_columns(e2)).value == doctest::Approx(1.0));
  const double th = 0.3;
  Eigen::MatrixXcd rot(2, 1);
  rot << std::cos(th), std::sin(th);
  const auto r = aperture(s1, subspace_from_columns(rot));
  CHECK(r.value == doctest::Approx(std::sin(th)).epsilon(1e-14));
  // sup over the unit vector of S2, inf over 10^4 sampled points of S1
  double best = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const double t = -1.5 + 3.0 * i / 9999.0;
    best = std::min(best, std::hypot(std::cos(th) - t, std::sin(th)));
  }
  CHECK(std::abs(best - r.value) <= 1e-4);
  CHECK(std::abs(r.gap_12 - r.gap_21) <= 1e-10);
}

TEST_CASE("random subspaces: sampled sup-inf never exceeds the gap, coincidence, unequal dimensions") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n;
  const auto a = subspace_from_columns(random_cols(rng, 8, 3));
  const auto b = subspace_from_columns(random_cols(rng, 8, 3));
  const double g = one_sided(a, b);
  double sampled = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXcd c(3);
    for (int k = 0; k < 3; ++k) c(k) = cplx(n(rng), n(rng));
    Eigen::VectorXcd x = b.basis * c;
    x.normalize();
    sampled = std::max(sampled, (x - a.basis * (a.basis.adjoint() * x)).norm());
  }
  CHECK(sampled <= g + 1e-12);
  CHECK(sampled >= g - 1e-2);
  CHECK(std::abs(one_sided(a, b) - one_sided(b, a)) <= 1e-10);

  Eigen::MatrixXcd cols = random_cols(rng, 8, 3);
  Eigen::MatrixXcd dup(8, 4);
  dup << cols, cols.col(0) + 2.0 * cols.col(1);
  const auto d = subspace_from_columns(dup);
  CHECK(d.rank() == 3);
  CHECK(d.dropped == 1);
  const auto line = subspace_from_columns(cols.leftCols(1));
  const auto r = aperture(line, d);
  CHECK(r.unequal_dims);
  CHECK(r.gap_21 <= 1e-12);
  CHECK(r.gap_12 > 0.1);
  CHECK_THROWS(one_sided(subspace_from_columns(cols, 1), subspace_from_columns(cols, 2)));
}

TEST_CASE("subspace dump round trip") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  const auto s = generate_cauchy_space(dom, pot(1.0, -0.5, 1.0), bm, 4);
  std::stringstream ss;
  write_subspace(s, ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header.find("m=4 sigma=49 rank=4") != std::string::npos);
  ss.seekg(0);
  const auto t = read_subspace(ss);
  CHECK(t.metric_hash == s.metric_hash);
  CHECK(t.basis == s.basis);
}
