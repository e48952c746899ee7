#include "doctest.h"

#include <random>

#include "lipstab/fixtures.hpp"
#include "lipstab/potential.hpp"

using namespace lipstab;

namespace {

PiecewiseLinearPotential constant(int n, double a) {
  std::vector<AffinePiece> p(static_cast<std::size_t>(n));
  for (auto& x : p) x.a = a;
  return {3, p, 10.0};
}

}  // namespace

TEST_CASE("constant and affine evaluation") {
  const GridDomain g = build_augmented_domain(fixtures::unit_box(3), 0.25);
  const auto one = constant(1, 1.0);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.in_omega_closure(n)) CHECK(eval(one, g, n) == 1.0);
  }
  AffinePiece p;
  p.A = {1.0, 0.0, 0.0};
  const PiecewiseLinearPotential lin(3, {p}, 1.0);
  CHECK(eval(lin, g, g.nearest_node({0.5, 0.0, 0.0})) == doctest::Approx(0.5));
}

TEST_CASE("interface nodes take the lower subdomain index") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 0.25);
  std::vector<AffinePiece> p(2);
  p[0].a = 1.0;
  p[1].a = -1.0;
  const PiecewiseLinearPotential q(3, p, 1.0);
  CHECK(eval(q, g, g.nearest_node({0.5, 0.5, 0.5})) == 1.0);
  CHECK(eval(q, g, g.nearest_node({0.5, 0.5, 0.75})) == -1.0);
}

TEST_CASE("exterior nodes are rejected") {
  const GridDomain g = build_augmented_domain(fixtures::unit_box(3), 0.25);
  const auto one = constant(1, 1.0);
  CHECK_THROWS(eval(one, g, g.nearest_node({0.5, 0.5, -0.5})));
}

TEST_CASE("norms") {
  const GridDomain g = build_augmented_domain(fixtures::unit_box(3), 0.25);
  AffinePiece p;
  p.a = 1.0;
  p.A = {1.0, 0.0, 0.0};
  CHECK(PiecewiseLinearPotential(3, {p}, 2.0).coeff_norm() == doctest::Approx(2.0));
  const auto zero = constant(1, 0.0);
  CHECK(zero.coeff_norm() == 0.0);
  CHECK(sup_norm(zero, g) == 0.0);
  AffinePiece d;
  d.A = {1.0, 1.0, 1.0};
  const PiecewiseLinearPotential diag(3, {d}, 3.0);
  // brute-force maximum over a fine point cloud never exceeds the corner value
  double brute = 0.0;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j)
      for (int k = 0; k <= 20; ++k) brute = std::max(brute, std::abs(d({i / 20.0, j / 20.0, k / 20.0})));
  CHECK(sup_norm(diag, g) == doctest::Approx(3.0));
  CHECK(brute == doctest::Approx(3.0));
}

TEST_CASE("extension to D_0") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 0.125);
  const auto zero = constant(2, 0.0);
  const auto qt = extend_to_omega0(zero, g);
  std::vector<std::size_t> d0;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.subdomain(n) == 0) d0.push_back(n);
    if (g.subdomain(n) >= 1) CHECK(eval(qt, g, n) == 0.0);
  }
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) CHECK(eval(qt, g, d0[rng() % d0.size()]) == 1.0);
  const auto qo = extend_to_omega0(constant(2, 1.0), g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.subdomain(n) >= 0) CHECK(eval(qo, g, n) == 1.0);
  }
}

TEST_CASE("affinity on each subdomain and corner-exact difference norm") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 0.125);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> t1(8), t2(8);
  for (auto& v : t1) v = u(rng);
  for (auto& v : t2) v = u(rng);
  const auto q1 = PiecewiseLinearPotential::from_coefficients(3, t1, 4.0);
  const auto q2 = PiecewiseLinearPotential::from_coefficients(3, t2, 4.0);
  for (int t = 0; t < 200; ++t) {
    const Index3 a{static_cast<int>(rng() % 9), static_cast<int>(rng() % 9), 6 + 2 * static_cast<int>(rng() % 5)};
    const Index3 b{static_cast<int>(rng() % 9), static_cast<int>(rng() % 9), 6 + 2 * static_cast<int>(rng() % 5)};
    const Index3 m{(a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2};
    if ((a[0] + b[0]) % 2 || (a[1] + b[1]) % 2) continue;
    const std::size_t na = g.node(a), nb = g.node(b), nm = g.node(m);
    if (g.subdomain(na) != g.subdomain(nb) || g.subdomain(na) != g.subdomain(nm)) continue;
    CHECK(eval(q1, g, na) + eval(q1, g, nb) == doctest::Approx(2.0 * eval(q1, g, nm)));
  }
  const auto diff = q1 - q2;
  double corner = 0.0;
  for (int j = 0; j < 2; ++j)
    for (int c = 0; c < 8; ++c) {
      const Box& b = g.spec().subdomains[static_cast<std::size_t>(j)];
      const Vec x{(c & 1) ? b.hi[0] : b.lo[0], (c & 2) ? b.hi[1] : b.lo[1], (c & 4) ? b.hi[2] : b.lo[2]};
      corner = std::max(corner, std::abs(q1.pieces()[static_cast<std::size_t>(j)](x) - q2.pieces()[static_cast<std::size_t>(j)](x)));
    }
  CHECK(sup_norm(diff, g) == doctest::Approx(corner));
  double grid_max = 0.0;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.in_omega_closure(n)) grid_max = std::max(grid_max, std::abs(eval(diff, g, n)));
  }
  CHECK(grid_max <= sup_norm(diff, g) + 1e-14);
}
