#include "lipstab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lipstab/kernels.hpp"
#include "lipstab/random.hpp"

namespace lipstab {

UnresolvedRegion unresolved_region(const GridDomain& g, const PiecewiseLinearPotential& q1,
                                   const PiecewiseLinearPotential& q2, const Chain& chain, int k) {
  if (k < 0 || k > static_cast<int>(chain.order.size())) throw std::invalid_argument("chain depth out of range");
  if (q1.size() != q2.size() || q1.size() != g.spec().subdomains.size()) {
    throw std::invalid_argument("potentials do not match the partition");
  }
  UnresolvedRegion u;
  u.k = k;
  u.resolved.push_back(0);
  for (int i = 0; i < k; ++i) u.resolved.push_back(chain.order[static_cast<std::size_t>(i)]);
  u.weight.assign(g.node_count(), 0.0);
  u.touches.assign(g.node_count(), 0);
  const int d = g.dim();
  const double cw = std::pow(0.5 * g.h(), d);
  Index3 cells{1, 1, 1};
  for (int a = 0; a < d; ++a) cells[a] = g.counts()[a] - 1;
  for (int c2 = 0; c2 < cells[2]; ++c2) {
    for (int c1 = 0; c1 < cells[1]; ++c1) {
      for (int c0 = 0; c0 < cells[0]; ++c0) {
        const Index3 cell{c0, c1, c2};
        const int lab = g.cell_label(cell);
        if (lab < 1 || std::find(u.resolved.begin(), u.resolved.end(), lab) != u.resolved.end()) continue;
        const AffinePiece& p1 = q1.piece(lab);
        const AffinePiece& p2 = q2.piece(lab);
        for (int corner = 0; corner < (1 << d); ++corner) {
          Index3 p = cell;
          for (int a = 0; a < d; ++a) p[a] += (corner >> a) & 1;
          const std::size_t n = g.node(p);
          const Vec x = g.coords(n);
          u.weight[n] += cw * (p1(x) - p2(x));
          u.touches[n] = 1;
        }
      }
    }
  }
  return u;
}

namespace {

void check_probe_point(const UnresolvedRegion& u, std::size_t y) {
  if (y >= u.touches.size()) throw std::out_of_range("probe node outside the grid");
  if (u.touches[y]) throw std::invalid_argument("probe point lies in the closure of U_k");
}

cplx weighted_product(const UnresolvedRegion& u, const ComplexField& a, const ComplexField& b) {
  return kernels::blocked_sum<cplx>(u.weight.size(), [&](std::size_t n) {
    return u.weight[n] == 0.0 ? cplx{} : u.weight[n] * a[n] * b[n];
  });
}

}  // namespace

cplx singular_value(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u, std::size_t y,
                    std::size_t z, const MultiIndex& alpha, const MultiIndex& beta) {
  check_probe_point(u, y);
  check_probe_point(u, z);
  const auto g1 = green_column(op1, y, alpha);
  const auto g2 = green_column(op2, z, beta);
  return weighted_product(u, g1.values, g2.values);
}

std::array<cplx, 3> probe_values(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u,
                                 std::size_t y, int axis) {
  check_probe_point(u, y);
  std::array<cplx, 3> out{};
  for (int o = 0; o < 3; ++o) {
    MultiIndex a{};
    a[static_cast<std::size_t>(axis)] = o;
    const auto g1 = green_column(op1, y, a);
    const auto g2 = green_column(op2, y, a);
    out[static_cast<std::size_t>(o)] = weighted_product(u, g1.values, g2.values);
  }
  return out;
}

ComplexField singular_field(const LoadSolver& op1, const LoadSolver& op2, const UnresolvedRegion& u, std::size_t z,
                            const MultiIndex& beta) {
  check_probe_point(u, z);
  const auto g2 = green_column(op2, z, beta);
  ComplexField load(op1.domain_ptr());
  for (std::size_t n = 0; n < load.size(); ++n) load[n] = -u.weight[n] * g2.values[n];
  return op1.solve_load(load);
}

double singular_field_residual(const LoadSolver& op1, const UnresolvedRegion& u, const ComplexField& s) {
  const ComplexField r = op1.apply(s);
  double inside = 0.0, all = 0.0;
  for (std::size_t n : op1.active_nodes()) {
    const double v = std::abs(r[n]);
    all = std::max(all, v);
    if (!u.touches[n]) inside = std::max(inside, v);
  }
  return all > 0.0 ? inside / all : 0.0;
}

GreenIdentity green_identity_residual(const LoadSolver& op1, const LoadSolver& op2, const ComplexField& u1,
                                      const ComplexField& u2) {
  if (op1.bc().region != Region::physical || op2.bc().region != Region::physical) {
    throw std::invalid_argument("Green's identity needs the physical operators");
  }
  if (u1.domain != op1.domain_ptr() || u2.domain != op1.domain_ptr() || op2.domain_ptr() != op1.domain_ptr()) {
    throw std::invalid_argument("fields do not conform to the operators");
  }
  GreenIdentity gi;
  const auto& nodes = op1.active_nodes();
  const auto& q1 = op1.potential();
  const auto& q2 = op2.potential();
  const auto& w = op1.weights();
  gi.volume = kernels::blocked_sum<cplx>(nodes.size(), [&](std::size_t i) {
    const std::size_t n = nodes[i];
    return w[n] * (q1[n] - q2[n]) * u1[n] * u2[n];
  });
  const auto d1 = normal_derivative(op1, u1);
  const auto d2 = normal_derivative(op2, u2);
  const auto& sigma = op1.domain().sigma_nodes();
  const double m = op1.surface_weight();
  gi.boundary = kernels::serial_sum<cplx>(sigma.size(), [&](std::size_t k) {
    return m * (u1[sigma[k]] * d2[k] - u2[sigma[k]] * d1[k]);
  });
  // size of the boundary pairing before cancellation
  const double terms = kernels::serial_sum<double>(sigma.size(), [&](std::size_t k) {
    return m * (std::abs(u1[sigma[k]] * d2[k]) + std::abs(u2[sigma[k]] * d1[k]));
  });
  const double scale = std::max({std::abs(gi.volume), std::abs(gi.boundary), terms, std::numeric_limits<double>::epsilon()});
  gi.residual = std::abs(gi.volume - gi.boundary) / scale;
  return gi;
}

namespace {

std::vector<cplx> combine(const std::vector<std::vector<cplx>>& data, const std::vector<cplx>& c) {
  std::vector<cplx> out(data.front().size());
  for (std::size_t k = 0; k < c.size(); ++k)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[k] * data[k][i];
  return out;
}

std::vector<cplx> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  std::vector<cplx> c(n);
  for (auto& v : c) {
    const double re = nd(rng);
    v = cplx(re, nd(rng));
  }
  return c;
}

}  // namespace

AlessandriniReport alessandrini_check(const LoadSolver& op1, const LoadSolver& op2, const BoundaryMetric& metric,
                                      std::size_t m, std::size_t n_samples, std::uint64_t seed) {
  AlessandriniReport rep;
  rep.m = m;
  rep.seed = seed;
  const CauchySubspace c1 = generate_cauchy_space(op1, metric, m);
  const CauchySubspace c2 = generate_cauchy_space(op2, metric, m);
  rep.distance = aperture(c1, c2);
  const double d = rep.distance.value;
  std::vector<std::vector<cplx>> data1, data2;
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto rng = sample_rng(seed, i);
    data1.push_back(combine(c1.impedance, gaussian(rng, m)));
    data2.push_back(combine(c2.impedance, gaussian(rng, m)));
  }
  const auto u1 = solve_generation_problems(op1, data1);
  const auto u2 = solve_generation_problems(op2, data2);
  for (std::size_t i = 0; i < n_samples; ++i) {
    AlessandriniSample s;
    s.identity = green_identity_residual(op1, op2, u1[i], u2[i]);
    s.norm1 = pair_norm(metric, {sigma_trace(op1.domain(), u1[i]), normal_derivative(op1, u1[i])});
    s.norm2 = pair_norm(metric, {sigma_trace(op2.domain(), u2[i]), normal_derivative(op2, u2[i])});
    s.bound = d * s.norm1 * s.norm2;
    s.holds = std::abs(s.identity.volume) <= s.bound * (1.0 + 1e-9) + 1e-12 * s.norm1 * s.norm2;
    rep.max_residual = std::max(rep.max_residual, s.identity.residual);
    if (s.bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, std::abs(s.identity.volume) / s.bound);
    rep.holds += s.holds ? 1 : 0;
    rep.samples.push_back(s);
  }
  return rep;
}

double ball_max(const GridDomain& g, const ComplexField& v, const Vec& c, double r) {
  const double r2 = (r + 1e-9 * g.h()) * (r + 1e-9 * g.h());
  double m = 0.0;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (!g.in_omega_closure(n)) continue;
    const Vec x = g.coords(n);
    double d2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
    if (d2 <= r2) m = std::max(m, std::abs(v[n]));
  }
  return m;
}

double three_spheres_tau(double m1, double m2, double m3) {
  if (!(m1 > 0.0) || m3 == m1) return std::numeric_limits<double>::quiet_NaN();
  return std::log(m3 / m2) / std::log(m3 / m1);
}

ThreeSpheresReport three_spheres(const GridDomain& g, const std::vector<ComplexField>& samples, const Vec& center,
                                 const std::array<double, 3>& radii) {
  if (!(radii[0] < radii[1] && radii[1] < radii[2]) || radii[0] <= 0.0) {
    throw std::invalid_argument("radii must satisfy 0 < r1 < r2 < r3");
  }
  for (int a = 0; a < g.dim(); ++a) {
    if (center[a] - radii[2] < g.spec().omega.lo[a] - 1e-12 || center[a] + radii[2] > g.spec().omega.hi[a] + 1e-12) {
      throw std::invalid_argument("B_{r3}(center) is not contained in Omega");
    }
  }
  ThreeSpheresReport rep;
  rep.center = center;
  rep.radii = radii;
  rep.tau_min = std::numeric_limits<double>::infinity();
  rep.tau_max = -std::numeric_limits<double>::infinity();
  bool open = true;
  for (const auto& v : samples) {
    std::array<double, 3> M{};
    for (int i = 0; i < 3; ++i) M[static_cast<std::size_t>(i)] = ball_max(g, v, center, radii[static_cast<std::size_t>(i)]);
    rep.maxima.push_back(M);
    const double t = three_spheres_tau(M[0], M[1], M[2]);
    if (std::isnan(t)) {
      ++rep.degenerate;
      continue;
    }
    rep.tau.push_back(t);
    rep.tau_min = std::min(rep.tau_min, t);
    rep.tau_max = std::max(rep.tau_max, t);
    rep.half_constant = std::max(rep.half_constant, M[1] / std::sqrt(M[0] * M[2]));
    open = open && t > 0.0 && t < 1.0;
  }
  rep.all_in_open_interval = open && !rep.tau.empty();
  return rep;
}

std::vector<ComplexField> random_solutions(const LoadSolver& physical, const BoundaryMetric& metric, std::size_t count,
                                           std::size_t modes, std::uint64_t seed) {
  modes = std::min(modes, metric.size());
  std::vector<std::vector<cplx>> basis;
  for (std::size_t k = 0; k < modes; ++k) basis.push_back(metric.eigenfunction(k));
  std::vector<std::vector<cplx>> data;
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = sample_rng(seed, i);
    data.push_back(combine(basis, gaussian(rng, modes)));
  }
  return solve_generation_problems(physical, data);
}

ProbeReport smallness_propagation_report(const LoadSolver& op1, const LoadSolver& op2,
                                         const PiecewiseLinearPotential& q1, const PiecewiseLinearPotential& q2,
                                         const Chain& chain, int k, const std::vector<int>& radii_h,
                                         std::optional<double> eps0, bool check_pde) {
  const GridDomain& g = op1.domain();
  if (k < 0 || k >= static_cast<int>(chain.interfaces.size())) {
    throw std::invalid_argument("chain depth k=" + std::to_string(k) + " exceeds the fixture chain");
  }
  if (op1.bc().region != Region::augmented || op2.bc().region != Region::augmented) {
    throw std::invalid_argument("probes need the augmented operators");
  }
  ProbeReport rep;
  rep.k = k;
  rep.dim = g.dim();
  rep.h = g.h();
  rep.beta = std::log(8.0 / 7.0) / std::log(4.0);
  rep.gamma = 2.0 - 0.5 * g.dim();
  rep.eps0 = eps0;
  if (g.out_of_paper_regime()) rep.flags.emplace_back("out_of_paper_regime");
  const InterfaceRecord& itf = chain.interfaces[static_cast<std::size_t>(k)];
  rep.axis = itf.axis;
  const UnresolvedRegion u = unresolved_region(g, q1, q2, chain, k);
  const double r1 = g.r0() / 16.0;
  bool beyond = false;
  for (int rh : radii_h) {
    if (rh < 4) throw std::invalid_argument("probe radius below 4h");
    ProbeRow row;
    row.r = rh * g.h();
    beyond = beyond || row.r > 2.0 * r1 + 1e-12;
    Index3 p = g.ijk(itf.center_node);
    p[static_cast<std::size_t>(itf.axis)] -= 2 * rh * itf.normal_sign;
    if (!g.in_grid(p)) throw std::invalid_argument("probe point leaves the grid");
    row.y = g.node(p);
    const auto v = probe_values(op1, op2, u, row.y, itf.axis);
    row.s = v[0];
    row.ds = v[1];
    row.d2s = v[2];
    row.envelope = std::pow(2.0 * row.r * 2.0 * row.r, rep.gamma);
    rep.rows.push_back(row);
  }
  if (beyond) rep.flags.emplace_back("radius_beyond_window");
  std::vector<double> r, f1, f2;
  for (const auto& row : rep.rows) {
    if (std::abs(row.s) == 0.0) continue;
    r.push_back(row.r);
    f1.push_back(std::abs(row.ds) / std::abs(row.s));
    f2.push_back(std::abs(row.d2s) / std::abs(row.s));
  }
  if (r.size() >= 2) {
    rep.fit_first = stats::loglog_fit(r, f1);
    rep.fit_second = stats::loglog_fit(r, f2);
  } else {
    rep.flags.emplace_back("zero_difference");
  }
  if (check_pde && !rep.rows.empty() && !r.empty()) {
    const ComplexField s = singular_field(op1, op2, u, rep.rows.front().y);
    rep.pde_residual = singular_field_residual(op1, u, s);
  }
  return rep;
}

}  // namespace lipstab
