#include "lipstab/green.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include "lipstab/kernels.hpp"

namespace lipstab {

double fundamental_solution(int dim, const Vec& x) {
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) r2 += x[a] * x[a];
  if (r2 == 0.0) throw std::domain_error("fundamental solution is singular at the origin");
  const double r = std::sqrt(r2);
  if (dim == 2) return -std::log(r) / (2.0 * std::numbers::pi);
  if (dim < 2) throw std::invalid_argument("dim must be at least 2");
  // (dim-2) |S^{dim-1}| r^{dim-2}, |S^{dim-1}| = 2 pi^{dim/2} / Gamma(dim/2)
  const double area = 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
  return 1.0 / ((dim - 2) * area * std::pow(r, dim - 2));
}

namespace {

struct LgfParams {
  Index3 n;
  double r2;
};

double lgf_integrand(double t, void* p) {
  const auto* s = static_cast<const LgfParams*>(p);
  double prod = 1.0;
  for (int a = 0; a < 3; ++a) prod *= gsl_sf_bessel_In_scaled(s->n[a], 2.0 * t);
  if (s->r2 == 0.0) return prod;
  const double heat = std::pow(4.0 * std::numbers::pi * t, -1.5) * std::exp(-s->r2 / (4.0 * t));
  return prod - heat;
}

// Integral over [T, inf) of prod_a e^{-2t} I_{n_a}(2t) - (4 pi t)^{-3/2} e^{-r^2/(4t)} from the
// large-argument expansion e^{-x} I_n(x) ~ (2 pi x)^{-1/2} sum_k c_k(n) x^{-k}, termwise in 1/t.
double lgf_tail(const Index3& n, double r2, double T) {
  constexpr int K = 12;
  std::array<double, K> prod{};
  prod[0] = 1.0;
  for (int a = 0; a < 3; ++a) {
    std::array<double, K> s{};
    double c = 1.0;
    const double m = 4.0 * n[a] * n[a];
    for (int k = 0; k < K; ++k) {
      s[k] = c * std::pow(0.5, k);  // x = 2t
      c *= -(m - (2.0 * k + 1) * (2.0 * k + 1)) / ((k + 1) * 8.0);
    }
    std::array<double, K> next{};
    for (int i = 0; i < K; ++i)
      for (int j = 0; i + j < K; ++j) next[i + j] += prod[i] * s[j];
    prod = next;
  }
  double heat = 1.0, sum = 0.0;
  for (int k = 0; k < K; ++k) {
    if (k > 0) heat *= -0.25 * r2 / k;
    sum += (prod[k] - heat) * std::pow(T, -k - 0.5) / (k + 0.5);
  }
  return sum * std::pow(4.0 * std::numbers::pi, -1.5);
}

double lgf_compute(const Index3& n) {
  LgfParams p{n, static_cast<double>(n[0]) * n[0] + static_cast<double>(n[1]) * n[1] + static_cast<double>(n[2]) * n[2]};
  if (p.r2 == 0.0) {
    // -Delta g = delta at the origin: g(0) = g(e_1) + 1/6.
    return lgf_compute({1, 0, 0}) + 1.0 / 6.0;
  }
  gsl_function f;
  f.function = &lgf_integrand;
  f.params = &p;
  constexpr std::size_t kWork = 2000;
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(kWork);
  const double split = std::max(1.0, p.r2);
  const double T = 50.0 * split;
  double a = 0.0, ea = 0.0, b = 0.0, eb = 0.0;
  gsl_integration_qag(&f, 0.0, split, 1e-16, 1e-12, kWork, GSL_INTEG_GAUSS41, w, &a, &ea);
  gsl_integration_qag(&f, split, T, 1e-16, 1e-12, kWork, GSL_INTEG_GAUSS41, w, &b, &eb);
  gsl_integration_workspace_free(w);
  return 1.0 / (4.0 * std::numbers::pi * std::sqrt(p.r2)) + a + b + lgf_tail(n, p.r2, T);
}

struct LgfCache {
  std::mutex mu;
  std::map<Index3, double> values;
};

LgfCache& lgf_cache() {
  static LgfCache c;
  return c;
}

struct GslQuiet {
  GslQuiet() { gsl_set_error_handler_off(); }
};

}  // namespace

double lattice_green_far(const Index3& n) {
  const double a = static_cast<double>(n[0]) * n[0];
  const double b = static_cast<double>(n[1]) * n[1];
  const double c = static_cast<double>(n[2]) * n[2];
  const double r2 = a + b + c;
  const double r = std::sqrt(r2);
  const double q4 = (a * a + b * b + c * c) / (r2 * r2);
  const double p8 = 46.0 * (a * a * a * a + b * b * b * b + c * c * c * c) -
                    488.0 * (a * a * a * (b + c) + b * b * b * (a + c) + c * c * c * (a + b)) +
                    1242.0 * (a * a * b * b + a * a * c * c + b * b * c * c) - 456.0 * a * b * c * (a + b + c);
  const double pi = std::numbers::pi;
  return 1.0 / (4.0 * pi * r) + (5.0 * q4 - 3.0) / (32.0 * pi * r * r2) +
         p8 / (256.0 * pi * std::pow(r, 13));
}

double lattice_green_unit(const Index3& n) {
  static GslQuiet quiet;
  Index3 key{std::abs(n[0]), std::abs(n[1]), std::abs(n[2])};
  std::sort(key.begin(), key.end());
  const double r2 = static_cast<double>(key[0]) * key[0] + static_cast<double>(key[1]) * key[1] +
                    static_cast<double>(key[2]) * key[2];
  if (r2 >= kLgfFarRadius * kLgfFarRadius) return lattice_green_far(key);
  auto& cache = lgf_cache();
  {
    std::lock_guard<std::mutex> lock(cache.mu);
    auto it = cache.values.find(key);
    if (it != cache.values.end()) return it->second;
  }
  const double v = lgf_compute(key);
  std::lock_guard<std::mutex> lock(cache.mu);
  cache.values.emplace(key, v);
  return v;
}

double lattice_fundamental_solution(int dim, const Index3& n, double h) {
  if (dim == 3) return lattice_green_unit(n) / h;
  Vec x{};
  for (int a = 0; a < dim; ++a) x[a] = n[a] * h;
  return fundamental_solution(dim, x);
}

std::vector<std::pair<Index3, double>> derivative_stencil(const MultiIndex& order, double h) {
  std::vector<std::pair<Index3, double>> st{{Index3{0, 0, 0}, 1.0}};
  for (int a = 0; a < kMaxDim; ++a) {
    std::vector<std::pair<int, double>> one;
    switch (order[a]) {
      case 0:
        one = {{0, 1.0}};
        break;
      case 1:
        one = {{-1, -0.5 / h}, {1, 0.5 / h}};
        break;
      case 2:
        one = {{-1, 1.0 / (h * h)}, {0, -2.0 / (h * h)}, {1, 1.0 / (h * h)}};
        break;
      default:
        throw std::invalid_argument("derivative order per axis must be 0, 1 or 2");
    }
    std::vector<std::pair<Index3, double>> next;
    for (const auto& [s, c] : st) {
      for (const auto& [o, w] : one) {
        Index3 t = s;
        t[a] += o;
        next.emplace_back(t, c * w);
      }
    }
    st = std::move(next);
  }
  return st;
}

ComplexField source_load(const LoadSolver& op, std::size_t y, const MultiIndex& order) {
  const GridDomain& g = op.domain();
  if (order[0] + order[1] + order[2] > 2) throw std::invalid_argument("source derivative order exceeds 2");
  for (int a = g.dim(); a < kMaxDim; ++a) {
    if (order[a] != 0) throw std::invalid_argument("derivative along a missing axis");
  }
  ComplexField load(op.domain_ptr());
  const Index3 p = g.ijk(y);
  for (const auto& [s, c] : derivative_stencil(order, g.h())) {
    Index3 t = p;
    for (int a = 0; a < kMaxDim; ++a) t[a] += s[a];
    if (!g.in_grid(t)) throw std::invalid_argument("source too close to the boundary for the requested order");
    const std::size_t m = g.node(t);
    if (!op.active(m) || op.impedance(m)) {
      throw std::invalid_argument("source too close to the boundary for the requested order");
    }
    load[m] -= c;
  }
  return load;
}

GreenColumn green_column(const LoadSolver& op, std::size_t y, const MultiIndex& order) {
  GreenColumn c;
  c.source = y;
  c.order = order;
  c.values = op.solve_load(source_load(op, y, order));
  return c;
}

std::vector<GreenColumn> green_columns(const LoadSolver& op, const std::vector<std::pair<std::size_t, MultiIndex>>& req) {
  std::vector<ComplexField> loads;
  loads.reserve(req.size());
  for (const auto& [y, o] : req) loads.push_back(source_load(op, y, o));
  std::vector<ComplexField> sol = op.solve_loads(loads);
  std::vector<GreenColumn> out(req.size());
  for (std::size_t k = 0; k < req.size(); ++k) {
    out[k].source = req[k].first;
    out[k].order = req[k].second;
    out[k].values = std::move(sol[k]);
  }
  return out;
}

KernelStack kernel_stack(const LoadSolver& laplace, const LoadSolver& full, std::size_t y) {
  if (laplace.domain_ptr() != full.domain_ptr()) throw std::invalid_argument("operators on different domains");
  for (std::size_t n : laplace.active_nodes()) {
    if (laplace.potential()[n] != 0.0) throw std::invalid_argument("laplace operator must carry q = 0");
  }
  KernelStack ks;
  ks.J = (full.dim() - 1) / 2;
  ks.layers.push_back(laplace.solve_load(source_load(laplace, y, {0, 0, 0})));
  const auto& w = full.weights();
  const auto& q = full.potential();
  auto next_load = [&](const ComplexField& r) {
    ComplexField load(full.domain_ptr());
    for (std::size_t n : full.active_nodes()) load[n] = -w[n] * q[n] * r[n];
    return load;
  };
  for (int j = 1; j <= ks.J; ++j) ks.layers.push_back(laplace.solve_load(next_load(ks.layers.back())));
  ks.layers.push_back(full.solve_load(next_load(ks.layers.back())));
  ks.reconstructed = ComplexField(full.domain_ptr());
  for (const auto& l : ks.layers) {
    for (std::size_t n = 0; n < l.size(); ++n) ks.reconstructed[n] += l[n];
  }
  return ks;
}

double gradient_energy_outside(const LoadSolver& op, const ComplexField& g, std::size_t y, double r) {
  const GridDomain& dom = op.domain();
  const Vec yc = dom.coords(y);
  const int d = dom.dim();
  const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dom.counts()[0]),
                                          static_cast<std::size_t>(dom.counts()[0]) * dom.counts()[1]};
  return kernels::blocked_sum<double>(dom.node_count(), [&](std::size_t n) {
    double s = 0.0;
    const Vec x = dom.coords(n);
    for (int a = 0; a < d; ++a) {
      const double w = op.edge_weight(n, a);
      if (w == 0.0) continue;
      const std::size_t m = n + stride[a];
      const Vec xm = dom.coords(m);
      double d1 = 0.0, d2 = 0.0;
      for (int b = 0; b < d; ++b) {
        d1 += (x[b] - yc[b]) * (x[b] - yc[b]);
        d2 += (xm[b] - yc[b]) * (xm[b] - yc[b]);
      }
      if (std::min(d1, d2) < r * r) continue;
      const cplx vn = op.active(n) ? g[n] : cplx(0.0);
      const cplx vm = op.active(m) ? g[m] : cplx(0.0);
      s += w * std::norm(vm - vn);
    }
    return s;
  });
}

double envelope_value(int dim, double r) {
  if (dim <= 3) return 1.0;
  if (dim == 4) return std::abs(std::log(r)) + 1.0;
  return std::pow(r, 4 - dim);
}

double envelope_gradient(int dim, double r) {
  if (dim <= 3) return std::abs(std::log(r)) + 1.0;
  return std::pow(r, 3 - dim);
}

double envelope_hessian(int dim, double r) { return std::pow(r, 2 - std::max(dim, 3)); }

namespace {

const std::vector<MultiIndex>& first_orders() {
  static const std::vector<MultiIndex> v{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  return v;
}

const std::vector<MultiIndex>& second_orders() {
  static const std::vector<MultiIndex> v{{2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  return v;
}

std::vector<MultiIndex> orders_for(int dim, const std::vector<MultiIndex>& all) {
  std::vector<MultiIndex> out;
  for (const auto& o : all) {
    bool ok = true;
    for (int a = dim; a < kMaxDim; ++a) ok = ok && o[a] == 0;
    if (ok) out.push_back(o);
  }
  return out;
}

bool is_mixed(const MultiIndex& o) { return o[0] + o[1] + o[2] == 2 && o[0] != 2 && o[1] != 2 && o[2] != 2; }

// d^alpha_y Gamma_h(x - y) with the same stencil as the source loads.
double gamma_derivative(int dim, const Index3& offset, const MultiIndex& order, double h) {
  double s = 0.0;
  for (const auto& [st, c] : derivative_stencil(order, h)) {
    Index3 d = offset;
    for (int a = 0; a < kMaxDim; ++a) d[a] -= st[a];
    s += c * lattice_fundamental_solution(dim, d, h);
  }
  return s;
}

std::vector<double> select_radii(const GridDomain& g, const AsymptoticsOptions& opt, std::vector<std::string>& flags,
                                 double window_max) {
  const double rmax = opt.max_radius > 0.0 ? opt.max_radius : g.r0() / 8.0;
  std::vector<double> radii;
  for (int k : opt.radii_h) {
    const double r = k * g.h();
    if (k >= 4 && r <= rmax + 1e-12) radii.push_back(r);
  }
  if (radii.size() < 4) throw std::invalid_argument("fewer than 4 probe radii in [4h, r0/8]");
  if (window_max > 0.0 && radii.back() > window_max + 1e-12) flags.emplace_back("radius_beyond_window");
  if (g.out_of_paper_regime()) {
    flags.emplace_back("out_of_paper_regime");
    flags.emplace_back("continuum_fundamental_solution");
  } else {
    flags.emplace_back("lattice_fundamental_solution");
  }
  return radii;
}

void finish(AsymptoticsReport& rep) {
  const int d = rep.dim;
  for (double r : rep.radii) {
    rep.env_value.push_back(envelope_value(d, r));
    rep.env_grad.push_back(envelope_gradient(d, r));
    rep.env_hess.push_back(envelope_hessian(d, r));
  }
  auto sup_ratio = [&](const std::vector<double>& q, const std::vector<double>& env) {
    double m = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) m = std::max(m, q[i] / env[i]);
    return m;
  };
  if (!rep.diff.empty()) {
    rep.fit_diff = stats::loglog_fit(rep.radii, rep.diff);
    rep.fit_ratio = stats::loglog_fit(rep.radii, rep.ratio);
    rep.sup_value_env = sup_ratio(rep.diff, rep.env_value);
  }
  if (!rep.grad_diff.empty()) {
    rep.fit_grad = stats::loglog_fit(rep.radii, rep.grad_diff);
    rep.sup_grad_env = sup_ratio(rep.grad_diff, rep.env_grad);
  }
  if (!rep.hess_diff.empty()) {
    rep.fit_hess = stats::loglog_fit(rep.radii, rep.hess_diff);
    rep.sup_hess_env = sup_ratio(rep.hess_diff, rep.env_hess);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < rep.hess_diff.size(); ++i) {
      const double v = rep.hess_diff[i] / rep.env_hess[i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    rep.hess_envelope_drift = hi / lo;
  }
}

}  // namespace

AsymptoticsReport interior_asymptotics(const LoadSolver& op, std::size_t y, int axis, const AsymptoticsOptions& opt) {
  const GridDomain& g = op.domain();
  AsymptoticsReport rep;
  rep.configuration = "interior";
  rep.dim = g.dim();
  rep.h = g.h();
  rep.radii = select_radii(g, opt, rep.flags, 0.0);
  const Index3 py = g.ijk(y);
  std::vector<std::size_t> targets;
  std::vector<Index3> offsets;
  for (double r : rep.radii) {
    Index3 o{0, 0, 0};
    o[axis] = static_cast<int>(std::lround(r / g.h()));
    Index3 px = py;
    px[axis] += o[axis];
    if (!g.in_grid(px) || !op.active(g.node(px))) throw std::invalid_argument("probe ray leaves the domain");
    targets.push_back(g.node(px));
    offsets.push_back(o);
  }
  auto sample = [&](const MultiIndex& o) {
    const ComplexField col = op.solve_load(source_load(op, y, o));
    std::vector<cplx> v(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) v[i] = col[targets[i]];
    return v;
  };
  const int d = g.dim();
  if (opt.value) {
    const auto v = sample({0, 0, 0});
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double gam = lattice_fundamental_solution(d, offsets[i], g.h());
      rep.gamma.push_back(std::abs(gam));
      rep.diff.push_back(std::abs(v[i] - gam));
      rep.ratio.push_back(rep.diff.back() / std::abs(gam));
    }
  }
  if (opt.gradient) {
    std::vector<double> acc(targets.size(), 0.0);
    for (const auto& o : orders_for(d, first_orders())) {
      const auto v = sample(o);
      for (std::size_t i = 0; i < targets.size(); ++i) acc[i] += std::norm(v[i] - gamma_derivative(d, offsets[i], o, g.h()));
    }
    for (double a : acc) rep.grad_diff.push_back(std::sqrt(a));
  }
  if (opt.hessian) {
    std::vector<double> acc(targets.size(), 0.0);
    for (const auto& o : orders_for(d, second_orders())) {
      const auto v = sample(o);
      const double m = is_mixed(o) ? 2.0 : 1.0;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        acc[i] += m * std::norm(v[i] - gamma_derivative(d, offsets[i], o, g.h()));
      }
    }
    for (double a : acc) rep.hess_diff.push_back(std::sqrt(a));
  }
  rep.flags.emplace_back("interior_set_empty_used_probe_ray");
  finish(rep);
  return rep;
}

AsymptoticsReport interface_asymptotics(const LoadSolver& op, std::size_t q_node, int axis, int normal_sign,
                                        double ball_radius, const AsymptoticsOptions& opt) {
  const GridDomain& g = op.domain();
  AsymptoticsReport rep;
  rep.configuration = "interface";
  rep.dim = g.dim();
  rep.h = g.h();
  rep.radii = select_radii(g, opt, rep.flags, g.r0() / 16.0);
  const int d = g.dim();
  const Index3 pq = g.ijk(q_node);
  const Vec xq = g.coords(q_node);
  // targets: nodes in B_ball(Q) strictly on the far side of the interface
  std::vector<std::size_t> targets;
  const int reach = static_cast<int>(std::floor(ball_radius / g.h() + 1e-9));
  for (int k = -reach; k <= reach; ++k) {
    for (int j = -reach; j <= reach; ++j) {
      for (int i = -reach; i <= reach; ++i) {
        Index3 o{i, j, d == 3 ? k : 0};
        if (d == 2 && k != 0) continue;
        if (o[axis] * normal_sign <= 0) continue;
        Index3 p = pq;
        for (int a = 0; a < kMaxDim; ++a) p[a] += o[a];
        if (!g.in_grid(p)) continue;
        const std::size_t n = g.node(p);
        const Vec x = g.coords(n);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) r2 += (x[a] - xq[a]) * (x[a] - xq[a]);
        if (r2 > ball_radius * ball_radius + 1e-12 || !op.active(n)) continue;
        targets.push_back(n);
      }
    }
  }
  if (targets.empty()) throw std::invalid_argument("empty interface probe ball");
  for (double r : rep.radii) {
    Index3 py = pq;
    py[axis] -= normal_sign * static_cast<int>(std::lround(r / g.h()));
    const std::size_t y = g.node(py);
    auto offset_of = [&](std::size_t x) {
      const Index3 px = g.ijk(x);
      return Index3{px[0] - py[0], px[1] - py[1], px[2] - py[2]};
    };
    auto accumulate = [&](const std::vector<MultiIndex>& orders, bool hess) {
      std::vector<double> acc(targets.size(), 0.0);
      for (const auto& o : orders) {
        const ComplexField col = op.solve_load(source_load(op, y, o));
        const double m = (hess && is_mixed(o)) ? 2.0 : 1.0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
          acc[i] += m * std::norm(col[targets[i]] - gamma_derivative(d, offset_of(targets[i]), o, g.h()));
        }
      }
      double s = 0.0;
      for (double a : acc) s = std::max(s, std::sqrt(a));
      return s;
    };
    if (opt.value) {
      const ComplexField col = op.solve_load(source_load(op, y, {0, 0, 0}));
      double s = 0.0, gmin = 0.0, rat = 0.0;
      for (std::size_t x : targets) {
        const double gam = lattice_fundamental_solution(d, offset_of(x), g.h());
        const double df = std::abs(col[x] - gam);
        if (df > s) {
          s = df;
          gmin = std::abs(gam);
        }
        rat = std::max(rat, df / std::abs(gam));
      }
      rep.diff.push_back(s);
      rep.gamma.push_back(gmin);
      rep.ratio.push_back(rat);
    }
    if (opt.gradient) rep.grad_diff.push_back(accumulate(orders_for(d, first_orders()), false));
    if (opt.hessian) rep.hess_diff.push_back(accumulate(orders_for(d, second_orders()), true));
  }
  finish(rep);
  return rep;
}

}  // namespace lipstab
