#include "lipstab/fixtures.hpp"

#include <stdexcept>

namespace lipstab::fixtures {

namespace {

Box unit(int dim) {
  Box b;
  for (int a = 0; a < dim; ++a) b.hi[a] = 1.0;
  return b;
}

DomainSpec base(int dim, double r0) {
  DomainSpec s;
  s.dim = dim;
  s.omega = unit(dim);
  s.sigma.axis = dim - 1;
  s.sigma.upper = false;
  s.sigma.whole_face = true;
  s.r0 = r0;
  return s;
}

}  // namespace

DomainSpec two_half_cube(int dim, double r0) {
  DomainSpec s = base(dim, r0);
  Box lower = s.omega;
  Box upper = s.omega;
  lower.hi[dim - 1] = 0.5;
  upper.lo[dim - 1] = 0.5;
  s.subdomains = {lower, upper};
  return s;
}

DomainSpec unit_box(int dim, double r0) {
  DomainSpec s = base(dim, r0);
  s.subdomains = {s.omega};
  return s;
}

DomainSpec quad_2x2(double r0) {
  DomainSpec s = base(2, r0);
  auto sq = [](double x0, double y0) {
    Box b;
    b.lo = {x0, y0, 0.0};
    b.hi = {x0 + 0.5, y0 + 0.5, 0.0};
    return b;
  };
  s.subdomains = {sq(0.0, 0.0), sq(0.5, 0.0), sq(0.5, 0.5), sq(0.0, 0.5)};
  return s;
}

DomainSpec by_name(const std::string& name, int dim) {
  if (name == "two_half_cube") return two_half_cube(dim);
  if (name == "unit_box") return unit_box(dim);
  if (name == "quad_2x2") {
    if (dim != 2) throw std::invalid_argument("quad_2x2 is two-dimensional");
    return quad_2x2();
  }
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

Chain natural_chain(const DomainSpec& spec) {
  Chain c;
  for (std::size_t j = 0; j < spec.subdomains.size(); ++j) c.order.push_back(static_cast<int>(j) + 1);
  return c;
}

}  // namespace lipstab::fixtures
