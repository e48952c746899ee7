#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "lipstab/fixtures.hpp"
#include "lipstab/geometry.hpp"

using namespace lipstab;

TEST_CASE("two half-cubes at h=1/8 carry labels 0,1,2 with Sigma_0 across D_0") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 1.0 / 8);
  std::set<int> labels;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.subdomain(n) >= 0) labels.insert(g.subdomain(n));
  }
  CHECK(labels == std::set<int>{0, 1, 2});
  // Sigma at z=0 on grid plane 6 (D_0 has thickness 0.75); Sigma_0 at z=-0.75.
  CHECK(g.sigma_plane() == 6);
  CHECK(g.sigma0_plane() == 0);
  CHECK(g.count(NodeClass::impedance_boundary) == 7u * 7u);
  CHECK(g.count(NodeClass::accessible_boundary) == 7u * 7u);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.node_class(n) == NodeClass::impedance_boundary) {
      CHECK(g.coords(n)[2] == doctest::Approx(-0.75));
      CHECK(g.subdomain(n) == 0);
    }
    if (g.node_class(n) == NodeClass::accessible_boundary) CHECK(g.coords(n)[2] == doctest::Approx(0.0));
  }
}

TEST_CASE("incommensurate spacing is rejected with the offending dimension") {
  try {
    (void)build_augmented_domain(fixtures::two_half_cube(3), 1.0 / 7);
    FAIL("expected rejection");
  } catch (const GeometryError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("not commensurate") != std::string::npos);
    CHECK(msg.find("subdomains[1].hi.z") != std::string::npos);
  }
}

TEST_CASE("sigma outside one face is rejected") {
  DomainSpec s = fixtures::unit_box(3);
  s.sigma.whole_face = false;
  s.sigma.footprint.lo = {0.0, 0.0, 0.0};
  s.sigma.footprint.hi = {1.5, 1.0, 0.0};
  CHECK_THROWS_AS((void)build_augmented_domain(s, 0.25), GeometryError);
}

TEST_CASE("node count and volume of the unit box by brute-force enumeration") {
  for (int inv : {4, 8}) {
    const double h = 1.0 / inv;
    const GridDomain g = build_augmented_domain(fixtures::unit_box(3), h);
    std::size_t omega_nodes = 0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      const Vec x = g.coords(n);
      bool in = true;
      for (int a = 0; a < 3; ++a) in = in && x[a] >= -1e-12 && x[a] <= 1.0 + 1e-12;
      if (in) ++omega_nodes;
      CHECK(g.in_omega_closure(n) == in);
    }
    CHECK(omega_nodes == static_cast<std::size_t>((inv + 1) * (inv + 1) * (inv + 1)));
    std::size_t cells = 0;
    for (int k = 0; k < g.counts()[2] - 1; ++k)
      for (int j = 0; j < g.counts()[1] - 1; ++j)
        for (int i = 0; i < g.counts()[0] - 1; ++i) cells += g.cell_label({i, j, k}) >= 1 ? 1 : 0;
    CHECK(static_cast<double>(cells) * h * h * h == doctest::Approx(1.0));
    // interior nodes times h^3 undercounts by at most one boundary layer
    const double vol_interior = static_cast<double>((inv - 1) * (inv - 1) * (inv - 1)) * h * h * h;
    CHECK(1.0 - vol_interior <= 6.0 * h + 1e-12);
  }
}

TEST_CASE("node classes form a partition and interior stencils are complete") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 1.0 / 8);
  std::size_t total = 0;
  for (NodeClass c : {NodeClass::interior, NodeClass::dirichlet_boundary, NodeClass::impedance_boundary,
                      NodeClass::accessible_boundary, NodeClass::exterior}) {
    total += g.count(c);
  }
  CHECK(total == g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (g.node_class(n) != NodeClass::interior) continue;
    const Index3 p = g.ijk(n);
    for (int a = 0; a < 3; ++a) {
      for (int s : {-1, 1}) {
        Index3 q = p;
        q[a] += s;
        REQUIRE(g.in_grid(q));
        CHECK(g.node_class(g.node(q)) != NodeClass::exterior);
      }
    }
  }
}

TEST_CASE("chain (D1,D2) on two half-cubes") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 1.0 / 8);
  const Chain c = validate_chain(g, fixtures::natural_chain(g.spec()));
  REQUIRE(c.interfaces.size() == 2);
  const auto& l1 = c.interfaces[0];
  const auto& l2 = c.interfaces[1];
  CHECK(l1.axis == 2);
  CHECK(l1.normal_sign == 1);
  CHECK(g.coords(l1.center_node)[2] == doctest::Approx(0.0));
  CHECK(g.coords(l1.center_node)[0] == doctest::Approx(0.5));
  CHECK(l2.axis == 2);
  CHECK(l2.normal_sign == 1);
  CHECK(g.coords(l2.center_node)[2] == doctest::Approx(0.5));
  CHECK(l1.flat_radius == doctest::Approx(0.5));
  CHECK(l2.flat_radius == doctest::Approx(0.5));
}

TEST_CASE("chain starting away from Sigma is rejected at link 1") {
  const GridDomain g = build_augmented_domain(fixtures::two_half_cube(3), 1.0 / 8);
  Chain c;
  c.order = {2, 1};
  try {
    (void)validate_chain(g, c);
    FAIL("expected rejection");
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("link 1") != std::string::npos);
  }
}

TEST_CASE("2x2 squares: three internal links, radii equal half the side") {
  const GridDomain g = build_augmented_domain(fixtures::quad_2x2(), 1.0 / 8);
  const Chain c = validate_chain(g, fixtures::natural_chain(g.spec()));
  REQUIRE(c.interfaces.size() == 4);
  // Brute force: interface of D_a and D_b are the nodes whose adjacent cells are all in {a, b}
  // with both labels present; the patch length from box arithmetic is 0.5.
  for (std::size_t k = 1; k < 4; ++k) {
    const int a = c.order[k - 1];
    const int b = c.order[k];
    std::size_t count = 0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      const Index3 p = g.ijk(n);
      std::set<int> seen;
      for (int m = 0; m < 4; ++m) seen.insert(g.cell_label({p[0] - (m & 1), p[1] - ((m >> 1) & 1), 0}));
      if (seen == std::set<int>{a, b}) ++count;
    }
    CHECK(count == c.interfaces[k].nodes.size());
    CHECK(static_cast<double>(count + 1) * g.h() / 2.0 == doctest::Approx(0.25));
    CHECK(c.interfaces[k].flat_radius == doctest::Approx(0.25));
  }
  CHECK(c.interfaces[1].axis == 0);
  CHECK(c.interfaces[2].axis == 1);
  CHECK(c.interfaces[3].axis == 0);
  CHECK(c.interfaces[3].normal_sign == -1);
}

TEST_CASE("too-small interface is rejected naming the link") {
  DomainSpec s = fixtures::quad_2x2(1.0);  // r0/3 exceeds the quarter-side radius
  s.d0_thickness = 0.375;
  const GridDomain g = build_augmented_domain(s, 1.0 / 8);
  try {
    (void)validate_chain(g, fixtures::natural_chain(s));
    FAIL("expected rejection");
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("link 1") != std::string::npos);
  }
}

TEST_CASE("refinement consistency") {
  for (const DomainSpec& s : {fixtures::two_half_cube(3), fixtures::quad_2x2(), fixtures::two_half_cube(2)}) {
    const GridDomain c = build_augmented_domain(s, 1.0 / 8);
    const GridDomain f = build_augmented_domain(s, 1.0 / 16);
    for (std::size_t n = 0; n < c.node_count(); ++n) {
      Index3 p = c.ijk(n);
      for (int a = 0; a < s.dim; ++a) p[a] *= 2;
      const std::size_t m = f.node(p);
      CHECK(f.coords(m)[0] == doctest::Approx(c.coords(n)[0]));
      CHECK(f.node_class(m) == c.node_class(n));
      CHECK(f.subdomain(m) == c.subdomain(n));
    }
  }
}

TEST_CASE("validate_chain is idempotent") {
  const GridDomain g = build_augmented_domain(fixtures::quad_2x2(), 1.0 / 8);
  const Chain a = validate_chain(g, fixtures::natural_chain(g.spec()));
  const Chain b = validate_chain(g, a);
  REQUIRE(a.interfaces.size() == b.interfaces.size());
  for (std::size_t k = 0; k < a.interfaces.size(); ++k) {
    CHECK(a.interfaces[k].nodes == b.interfaces[k].nodes);
    CHECK(a.interfaces[k].center_node == b.interfaces[k].center_node);
    CHECK(a.interfaces[k].normal_sign == b.interfaces[k].normal_sign);
  }
}

TEST_CASE("node dump has one line per node") {
  const GridDomain g = build_augmented_domain(fixtures::unit_box(2), 0.25);
  std::ostringstream os;
  dump_nodes(g, os);
  std::istringstream is(os.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') ++lines;
  }
  CHECK(lines == g.node_count());
  CHECK(g.out_of_paper_regime());
}
