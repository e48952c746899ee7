#include "doctest.h"

#include <cmath>
#include <complex>

#include "lipstab/fixtures.hpp"
#include "lipstab/layered.hpp"
#include "lipstab/probes.hpp"

using namespace lipstab;

namespace {

PiecewiseLinearPotential pot3(double a1, double a2, double s = 1.0) {
  std::vector<AffinePiece> p(2);
  p[0].a = a1;
  p[0].A = {0.3 * s, -0.2 * s, 0.5 * s};
  p[1].a = a2;
  p[1].A = {0.2 * s, 0.1 * s, -0.3 * s};
  return {3, p, 3.0};
}

PiecewiseLinearPotential zonly(double a1, double s1, double a2, double s2) {
  std::vector<AffinePiece> p(2);
  p[0].a = a1;
  p[0].A = {0.0, 0.0, s1};
  p[1].a = a2;
  p[1].A = {0.0, 0.0, s2};
  return {3, p, 3.0};
}

struct Setup {
  DomainPtr dom;
  Chain chain;
  PiecewiseLinearPotential q1, q2;
  std::unique_ptr<DiscreteOperator> a1, a2;
  Setup(double h, PiecewiseLinearPotential p1, PiecewiseLinearPotential p2)
      : dom(make_domain(fixtures::two_half_cube(3), h)), q1(std::move(p1)), q2(std::move(p2)) {
    chain = validate_chain(*dom, fixtures::natural_chain(dom->spec()));
    a1 = std::make_unique<DiscreteOperator>(dom, q1, BcDescriptor{Region::augmented});
    a2 = std::make_unique<DiscreteOperator>(dom, q2, BcDescriptor{Region::augmented});
  }
};

}  // namespace

TEST_CASE("unresolved region weights integrate the affine difference exactly") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  const Chain chain = validate_chain(*dom, fixtures::natural_chain(dom->spec()));
  const auto q1 = pot3(1.0, -0.5), q2 = pot3(0.2, 0.4, -1.0);
  // integral of a + A.x over [0,1]^2 x [z0,z1]
  auto integral = [](const AffinePiece& p, double z0, double z1) {
    return (z1 - z0) * (p.a + 0.5 * p.A[0] + 0.5 * p.A[1] + 0.5 * (z0 + z1) * p.A[2]);
  };
  const double i1 = integral(q1.piece(1), 0, 0.5) - integral(q2.piece(1), 0, 0.5);
  const double i2 = integral(q1.piece(2), 0.5, 1) - integral(q2.piece(2), 0.5, 1);
  auto total = [](const UnresolvedRegion& u) {
    double s = 0.0;
    for (double w : u.weight) s += w;
    return s;
  };
  const auto u0 = unresolved_region(*dom, q1, q2, chain, 0);
  const auto u1 = unresolved_region(*dom, q1, q2, chain, 1);
  CHECK(total(u0) == doctest::Approx(i1 + i2).epsilon(1e-12));
  CHECK(total(u1) == doctest::Approx(i2).epsilon(1e-12));
  CHECK(u0.touches[dom->nearest_node({0.5, 0.5, 0.0})]);
  CHECK(!u0.touches[dom->nearest_node({0.5, 0.5, -0.125})]);
  CHECK(!u1.touches[dom->nearest_node({0.5, 0.5, 0.375})]);
  CHECK(u1.touches[dom->nearest_node({0.5, 0.5, 0.5})]);
}

TEST_CASE("singular values: zero difference, swap identity, field consistency, PDE in W_k") {
  Setup s(1.0 / 8, pot3(1.0, -0.5), pot3(0.2, 0.4, -1.0));
  const auto u = unresolved_region(*s.dom, s.q1, s.q2, s.chain, 1);
  const std::size_t y = s.dom->nearest_node({0.5, 0.5, 0.25});
  const std::size_t z = s.dom->nearest_node({0.375, 0.625, 0.125});

  const auto same = unresolved_region(*s.dom, s.q1, s.q1, s.chain, 1);
  CHECK(singular_value(*s.a1, *s.a1, same, y, z) == cplx(0.0, 0.0));

  const auto swapped = unresolved_region(*s.dom, s.q2, s.q1, s.chain, 1);
  const cplx a = singular_value(*s.a1, *s.a2, u, y, z, {1, 0, 0}, {0, 0, 2});
  const cplx b = singular_value(*s.a2, *s.a1, swapped, z, y, {0, 0, 2}, {1, 0, 0});
  CHECK(std::abs(a + b) <= 1e-10 * std::abs(a));

  const cplx direct = singular_value(*s.a1, *s.a2, u, y, z);
  const ComplexField f = singular_field(*s.a1, *s.a2, u, z);
  CHECK(std::abs(f[y] - direct) <= 1e-10 * std::abs(direct));
  CHECK(singular_field_residual(*s.a1, u, f) <= 1e-8);

  CHECK_THROWS(singular_value(*s.a1, *s.a2, u, s.dom->nearest_node({0.5, 0.5, 0.75}), z));
}

TEST_CASE("Green identity: reciprocity and exact summation by parts") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  DiscreteOperator p1(dom, pot3(1.0, -0.5), BcDescriptor{Region::physical});
  DiscreteOperator p2(dom, pot3(0.2, 0.4, -1.0), BcDescriptor{Region::physical});
  const auto ua = random_solutions(p1, bm, 2, 10, 3);
  const auto same = green_identity_residual(p1, p1, ua[0], ua[1]);
  CHECK(same.volume == cplx(0.0, 0.0));
  CHECK(same.residual <= 1e-9);
  const auto ub = random_solutions(p2, bm, 1, 10, 4);
  const auto gi = green_identity_residual(p1, p2, ua[0], ub[0]);
  CHECK(std::abs(gi.volume) > 0.0);
  CHECK(gi.residual <= 1e-8);
  DiscreteOperator aug(dom, pot3(1.0, -0.5), BcDescriptor{Region::augmented});
  CHECK_THROWS(green_identity_residual(aug, p2, ua[0], ub[0]));
}

TEST_CASE("Alessandrini inequality on sampled pairs") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 8);
  BoundaryMetric bm(*dom);
  DiscreteOperator p1(dom, pot3(1.0, -0.5), BcDescriptor{Region::physical});
  DiscreteOperator p2(dom, pot3(0.2, 0.4, -1.0), BcDescriptor{Region::physical});
  const auto rep = alessandrini_check(p1, p2, bm, 12, 50, 11);
  CHECK(rep.samples.size() == 50);
  CHECK(rep.holds == 50);
  CHECK(rep.max_residual <= 1e-8);
  CHECK(rep.max_ratio <= 1.0);
  CHECK(rep.distance.value > 0.0);
  const auto eq = alessandrini_check(p1, p1, bm, 6, 5, 11);
  CHECK(eq.distance.value <= 1e-10);
  CHECK(eq.holds == 5);
}

TEST_CASE("three spheres: linear and cubic growth oracles") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 16);
  ComplexField x1(dom);
  for (std::size_t n = 0; n < dom->node_count(); ++n) x1[n] = dom->coords(n)[0];
  const Vec c{0.5, 0.5, 0.5};
  const std::array<double, 3> r{0.125, 0.25, 0.375};
  const auto rep = three_spheres(*dom, {x1}, c, r);
  for (int i = 0; i < 3; ++i) CHECK(rep.maxima[0][static_cast<std::size_t>(i)] == doctest::Approx(0.5 + r[static_cast<std::size_t>(i)]).epsilon(1e-14));
  CHECK(rep.tau[0] == doctest::Approx(std::log(0.875 / 0.75) / std::log(0.875 / 0.625)).epsilon(1e-12));

  auto d2 = make_domain(fixtures::two_half_cube(2), 1.0 / 64);
  ComplexField cubic(d2);
  for (std::size_t n = 0; n < d2->node_count(); ++n) {
    const Vec x = d2->coords(n);
    cubic[n] = std::real(std::pow(cplx(x[0] - 0.5, x[1] - 0.5), 3));
  }
  const std::array<double, 3> rr{4.0 / 64, 8.0 / 64, 16.0 / 64};
  const auto rc = three_spheres(*d2, {cubic}, {0.5, 0.5, 0.0}, rr);
  CHECK(std::abs(rc.tau[0] - std::log(rr[2] / rr[1]) / std::log(rr[2] / rr[0])) <= 1e-6);
  CHECK(std::abs(rc.maxima[0][1] - std::pow(rr[1], 3)) <= 1e-14);

  ComplexField zero(dom);
  const auto rz = three_spheres(*dom, {zero, x1}, c, r);
  CHECK(rz.degenerate == 1);
  CHECK(rz.tau.size() == 1);
  CHECK_THROWS(three_spheres(*dom, {x1}, c, {0.125, 0.25, 0.75}));
}

TEST_CASE("three spheres on generated solutions") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 12);
  BoundaryMetric bm(*dom);
  DiscreteOperator p(dom, pot3(1.0, -0.5), BcDescriptor{Region::physical});
  const auto sols = random_solutions(p, bm, 50, 10, 2024);
  const auto rep = three_spheres(*dom, sols, {0.5, 0.5, 0.5}, {1.0 / 12, 2.0 / 12, 4.0 / 12});
  CHECK(rep.tau.size() + rep.degenerate == 50);
  CHECK(rep.all_in_open_interval);
  CHECK(rep.half_constant > 0.0);
}

TEST_CASE("smallness propagation report mechanics") {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 32);
  const Chain chain = validate_chain(*dom, fixtures::natural_chain(dom->spec()));
  const auto q1 = zonly(1.0, -0.5, 0.5, 0.8), q2 = zonly(1.0, -0.5, -0.3, 0.2);
  LayeredSolver o1(dom, q1), o2(dom, q2);
  const auto rep = smallness_propagation_report(o1, o2, q1, q2, chain, 1, {4, 5, 7});
  CHECK(rep.rows.size() == 3);
  CHECK(rep.beta == doctest::Approx(std::log(8.0 / 7.0) / std::log(4.0)));
  CHECK(rep.gamma == doctest::Approx(0.5));
  CHECK(rep.axis == 2);
  for (const auto& row : rep.rows) {
    CHECK(std::abs(row.s) > 0.0);
    CHECK(std::abs(row.d2s) > std::abs(row.ds));
  }
  CHECK(rep.fit_first.slope < 0.0);
  CHECK(rep.fit_second.slope < rep.fit_first.slope);
  CHECK(rep.pde_residual <= 1e-8);
  CHECK(std::find(rep.flags.begin(), rep.flags.end(), "radius_beyond_window") != rep.flags.end());

  const auto zero = smallness_propagation_report(o1, o1, q1, q1, chain, 1, {4, 5});
  for (const auto& row : zero.rows) CHECK(row.s == cplx(0.0, 0.0));
  CHECK(std::find(zero.flags.begin(), zero.flags.end(), "zero_difference") != zero.flags.end());
  CHECK_THROWS(smallness_propagation_report(o1, o2, q1, q2, chain, 2, {4}));
  CHECK_THROWS(smallness_propagation_report(o1, o2, q1, q2, chain, 1, {2}));
}
