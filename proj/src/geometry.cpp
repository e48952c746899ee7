#include "lipstab/geometry.hpp"

#include "lipstab/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace lipstab {

namespace {

constexpr double kCommensurateTol = 1e-9;

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

void check_multiple(double x, double h, const std::string& what) {
  const double k = x / h;
  if (std::abs(k - std::round(k)) > kCommensurateTol * std::max(1.0, std::abs(k))) {
    throw GeometryError("spacing h=" + fmt_double(h) + " is not commensurate with " + what + "=" + fmt_double(x));
  }
}

bool box_contains_point(const Box& b, const Vec& x, int dim) {
  for (int a = 0; a < dim; ++a) {
    if (x[a] < b.lo[a] || x[a] > b.hi[a]) return false;
  }
  return true;
}

double overlap_length(double lo1, double hi1, double lo2, double hi2) {
  return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

}  // namespace

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::interior:
      return "interior";
    case NodeClass::dirichlet_boundary:
      return "dirichlet_boundary";
    case NodeClass::impedance_boundary:
      return "impedance_boundary";
    case NodeClass::accessible_boundary:
      return "accessible_boundary";
    case NodeClass::exterior:
      return "exterior";
  }
  return "?";
}

Index3 GridDomain::ijk(std::size_t n) const {
  Index3 r{0, 0, 0};
  const auto nx = static_cast<std::size_t>(counts_[0]);
  const auto ny = static_cast<std::size_t>(counts_[1]);
  r[0] = static_cast<int>(n % nx);
  n /= nx;
  r[1] = static_cast<int>(n % ny);
  r[2] = static_cast<int>(n / ny);
  return r;
}

bool GridDomain::in_grid(const Index3& ijk) const {
  for (int a = 0; a < kMaxDim; ++a) {
    if (ijk[a] < 0 || ijk[a] >= counts_[a]) return false;
  }
  return true;
}

Vec GridDomain::coords(const Index3& ijk) const {
  Vec x{};
  for (int a = 0; a < dim_; ++a) x[a] = origin_[a] + h_ * ijk[a];
  return x;
}

Vec GridDomain::coords(std::size_t n) const { return coords(ijk(n)); }

std::size_t GridDomain::nearest_node(const Vec& x) const {
  Index3 c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const int k = static_cast<int>(std::lround((x[a] - origin_[a]) / h_));
    c[a] = std::clamp(k, 0, counts_[a] - 1);
  }
  return node(c);
}

int GridDomain::plane_index(int axis, double x) const {
  return static_cast<int>(std::lround((x - origin_[axis]) / h_));
}

bool GridDomain::cell_in_grid(const Index3& cell) const {
  for (int a = 0; a < dim_; ++a) {
    if (cell[a] < 0 || cell[a] >= counts_[a] - 1) return false;
  }
  return true;
}

int GridDomain::cell_label(const Index3& cell) const {
  if (!cell_in_grid(cell)) return -1;
  const auto cx = static_cast<std::size_t>(counts_[0] - 1);
  const auto cy = static_cast<std::size_t>(dim_ >= 2 ? counts_[1] - 1 : 1);
  const std::size_t idx =
      static_cast<std::size_t>(cell[0]) + cx * (static_cast<std::size_t>(cell[1]) + cy * static_cast<std::size_t>(cell[2]));
  return cell_label_[idx];
}

std::size_t GridDomain::count(NodeClass c) const {
  return static_cast<std::size_t>(std::count(node_class_.begin(), node_class_.end(), c));
}

GridDomain build_augmented_domain(const DomainSpec& spec, double h) {
  const int dim = spec.dim;
  if (dim != 2 && dim != 3) throw GeometryError("dim must be 2 or 3");
  if (!(h > 0.0)) throw GeometryError("h must be positive");
  if (spec.subdomains.empty()) throw GeometryError("at least one subdomain is required");
  if (!(spec.r0 > 0.0)) throw GeometryError("r0 must be positive");

  const char* axis_name[] = {"x", "y", "z"};
  for (int a = 0; a < dim; ++a) {
    if (!(spec.omega.hi[a] > spec.omega.lo[a])) throw GeometryError("omega box is empty along " + std::string(axis_name[a]));
    check_multiple(spec.omega.lo[a], h, std::string("omega.lo.") + axis_name[a]);
    check_multiple(spec.omega.hi[a], h, std::string("omega.hi.") + axis_name[a]);
  }
  double vol_omega = 1.0;
  for (int a = 0; a < dim; ++a) vol_omega *= spec.omega.hi[a] - spec.omega.lo[a];
  double vol_sum = 0.0;
  for (std::size_t j = 0; j < spec.subdomains.size(); ++j) {
    const Box& b = spec.subdomains[j];
    const std::string name = "subdomains[" + std::to_string(j + 1) + "]";
    double v = 1.0;
    for (int a = 0; a < dim; ++a) {
      check_multiple(b.lo[a], h, name + ".lo." + axis_name[a]);
      check_multiple(b.hi[a], h, name + ".hi." + axis_name[a]);
      if (!(b.hi[a] > b.lo[a])) throw GeometryError(name + " is empty");
      if (b.lo[a] < spec.omega.lo[a] - 1e-12 || b.hi[a] > spec.omega.hi[a] + 1e-12) {
        throw GeometryError(name + " leaves omega");
      }
      v *= b.hi[a] - b.lo[a];
    }
    vol_sum += v;
    for (std::size_t i = 0; i < j; ++i) {
      double ov = 1.0;
      for (int a = 0; a < dim; ++a) ov *= overlap_length(b.lo[a], b.hi[a], spec.subdomains[i].lo[a], spec.subdomains[i].hi[a]);
      if (ov > 1e-12 * vol_omega) {
        throw GeometryError("subdomains " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " overlap");
      }
    }
  }
  if (std::abs(vol_sum - vol_omega) > 1e-9 * vol_omega) throw GeometryError("subdomains do not cover omega");

  const SigmaSpec& sg = spec.sigma;
  if (sg.axis < 0 || sg.axis >= dim) throw GeometryError("sigma.axis out of range");
  const int na = sg.axis;
  const double sigma_coord = sg.upper ? spec.omega.hi[na] : spec.omega.lo[na];

  Box sigma_box = spec.omega;
  if (!sg.whole_face) {
    for (int a = 0; a < dim; ++a) {
      if (a == na) continue;
      check_multiple(sg.footprint.lo[a], h, std::string("sigma.lo.") + axis_name[a]);
      check_multiple(sg.footprint.hi[a], h, std::string("sigma.hi.") + axis_name[a]);
      if (sg.footprint.lo[a] < spec.omega.lo[a] - 1e-12 || sg.footprint.hi[a] > spec.omega.hi[a] + 1e-12 ||
          !(sg.footprint.hi[a] > sg.footprint.lo[a])) {
        throw GeometryError("sigma is not contained in one face of omega");
      }
      sigma_box.lo[a] = sg.footprint.lo[a];
      sigma_box.hi[a] = sg.footprint.hi[a];
    }
  }
  sigma_box.lo[na] = sigma_box.hi[na] = sigma_coord;

  // Sigma_1: the part of Sigma on the boundary of D_1.
  const Box& d1 = spec.subdomains.front();
  const double d1_face = sg.upper ? d1.hi[na] : d1.lo[na];
  if (std::abs(d1_face - sigma_coord) > 1e-12) throw GeometryError("D_1 does not touch sigma");
  Box sigma1 = sigma_box;
  for (int a = 0; a < dim; ++a) {
    if (a == na) continue;
    sigma1.lo[a] = std::max(sigma_box.lo[a], d1.lo[a]);
    sigma1.hi[a] = std::min(sigma_box.hi[a], d1.hi[a]);
    if (!(sigma1.hi[a] > sigma1.lo[a])) throw GeometryError("D_1 does not touch sigma");
  }

  const double t = spec.d0_thickness > 0.0 ? spec.d0_thickness : 0.5 * spec.r0;
  check_multiple(t, h, "d0_thickness");
  Box d0 = sigma1;
  if (sg.upper) {
    d0.lo[na] = sigma_coord;
    d0.hi[na] = sigma_coord + t;
  } else {
    d0.lo[na] = sigma_coord - t;
    d0.hi[na] = sigma_coord;
  }

  GridDomain g;
  g.spec_ = spec;
  g.dim_ = dim;
  g.h_ = h;
  g.d0_thickness_ = t;
  g.d0_box_ = d0;
  g.sigma_box_ = sigma_box;
  Box bbox = spec.omega;
  for (int a = 0; a < dim; ++a) {
    bbox.lo[a] = std::min(bbox.lo[a], d0.lo[a]);
    bbox.hi[a] = std::max(bbox.hi[a], d0.hi[a]);
  }
  for (int a = 0; a < kMaxDim; ++a) {
    if (a < dim) {
      g.origin_[a] = bbox.lo[a];
      g.counts_[a] = static_cast<int>(std::lround((bbox.hi[a] - bbox.lo[a]) / h)) + 1;
    } else {
      g.origin_[a] = 0.0;
      g.counts_[a] = 1;
    }
  }
  g.sigma_plane_ = g.plane_index(na, sigma_coord);
  g.sigma0_plane_ = g.plane_index(na, sg.upper ? d0.hi[na] : d0.lo[na]);

  // Cell labels from cell centers.
  const int cx = g.counts_[0] - 1;
  const int cy = dim >= 2 ? g.counts_[1] - 1 : 1;
  const int cz = dim >= 3 ? g.counts_[2] - 1 : 1;
  g.cell_label_.assign(static_cast<std::size_t>(cx) * cy * cz, -1);
  for (int k = 0; k < cz; ++k) {
    for (int j = 0; j < cy; ++j) {
      for (int i = 0; i < cx; ++i) {
        const Index3 c{i, j, k};
        Vec center{};
        for (int a = 0; a < dim; ++a) center[a] = g.origin_[a] + h * (c[a] + 0.5);
        int label = -1;
        for (std::size_t s = 0; s < spec.subdomains.size(); ++s) {
          if (box_contains_point(spec.subdomains[s], center, dim)) {
            label = static_cast<int>(s) + 1;
            break;
          }
        }
        if (label < 0 && box_contains_point(d0, center, dim)) label = 0;
        g.cell_label_[static_cast<std::size_t>(i) + static_cast<std::size_t>(cx) * (j + static_cast<std::size_t>(cy) * k)] =
            label;
      }
    }
  }

  // Strictly inside a rectangle on a plane, lateral axes only.
  auto strictly_inside_lateral = [&](const Vec& x, const Box& b) {
    for (int a = 0; a < dim; ++a) {
      if (a == na) continue;
      if (!(x[a] > b.lo[a] + 1e-12 && x[a] < b.hi[a] - 1e-12)) return false;
    }
    return true;
  };

  const std::size_t nn = static_cast<std::size_t>(g.counts_[0]) * g.counts_[1] * g.counts_[2];
  g.node_class_.assign(nn, NodeClass::exterior);
  g.node_label_.assign(nn, -1);
  g.active_aug_.assign(nn, 0);
  g.active_phys_.assign(nn, 0);
  g.omega_closure_.assign(nn, 0);
  const int ncorner = 1 << dim;
  for (std::size_t n = 0; n < nn; ++n) {
    const Index3 p = g.ijk(n);
    int inside = 0;
    int omega_cells = 0;
    int min_omega_label = std::numeric_limits<int>::max();
    bool touches_d0 = false;
    for (int m = 0; m < ncorner; ++m) {
      Index3 c = p;
      for (int a = 0; a < dim; ++a) c[a] -= (m >> a) & 1;
      const int lab = g.cell_label(c);
      if (lab >= 0) ++inside;
      if (lab >= 1) {
        ++omega_cells;
        min_omega_label = std::min(min_omega_label, lab);
      }
      if (lab == 0) touches_d0 = true;
    }
    const Vec x = g.coords(p);
    if (omega_cells > 0) {
      g.node_label_[n] = min_omega_label;
      g.omega_closure_[n] = 1;
    } else if (touches_d0) {
      g.node_label_[n] = 0;
    }
    const bool on_sigma = p[na] == g.sigma_plane_ && strictly_inside_lateral(x, sigma_box);
    const bool on_sigma0 = p[na] == g.sigma0_plane_ && strictly_inside_lateral(x, d0);
    NodeClass cls = NodeClass::exterior;
    if (inside == 0) {
      cls = NodeClass::exterior;
    } else if (on_sigma) {
      cls = NodeClass::accessible_boundary;
    } else if (inside == ncorner) {
      cls = NodeClass::interior;
    } else if (on_sigma0) {
      cls = NodeClass::impedance_boundary;
    } else {
      cls = NodeClass::dirichlet_boundary;
    }
    g.node_class_[n] = cls;
    g.active_aug_[n] = (cls == NodeClass::interior || cls == NodeClass::impedance_boundary ||
                        (cls == NodeClass::accessible_boundary && inside == ncorner))
                           ? 1
                           : 0;
    g.active_phys_[n] = ((omega_cells == ncorner) || cls == NodeClass::accessible_boundary) ? 1 : 0;
    if (cls == NodeClass::accessible_boundary) g.sigma_nodes_.push_back(n);
  }
  // Node order above is x-fastest, which is already lexicographic in (z, y, x);
  // sort by lateral indices with the first lateral axis slowest.
  std::sort(g.sigma_nodes_.begin(), g.sigma_nodes_.end(), [&](std::size_t a, std::size_t b) {
    const Index3 pa = g.ijk(a);
    const Index3 pb = g.ijk(b);
    for (int ax = 0; ax < dim; ++ax) {
      if (ax == na) continue;
      if (pa[ax] != pb[ax]) return pa[ax] < pb[ax];
    }
    return false;
  });
  return g;
}

namespace {

struct PatchStats {
  std::vector<std::size_t> nodes;
  int sign = 1;
};

// Nodes strictly inside a flat patch separating cells labelled `from` and `to`
// across planes normal to `axis`.
PatchStats interface_nodes(const GridDomain& g, int from, int to, int axis) {
  PatchStats st;
  const int dim = g.dim();
  const int ncorner = 1 << dim;
  int plus = 0;
  int minus = 0;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Index3 p = g.ijk(n);
    bool below_from = true;
    bool above_to = true;
    bool below_to = true;
    bool above_from = true;
    for (int m = 0; m < ncorner; ++m) {
      Index3 c = p;
      for (int a = 0; a < dim; ++a) c[a] -= (m >> a) & 1;
      const bool below = ((m >> axis) & 1) != 0;
      const int lab = g.cell_label(c);
      if (below) {
        below_from = below_from && lab == from;
        below_to = below_to && lab == to;
      } else {
        above_to = above_to && lab == to;
        above_from = above_from && lab == from;
      }
    }
    if (below_from && above_to) {
      st.nodes.push_back(n);
      ++plus;
    } else if (below_to && above_from) {
      st.nodes.push_back(n);
      ++minus;
    }
  }
  st.sign = plus >= minus ? 1 : -1;
  return st;
}

}  // namespace

Chain validate_chain(const GridDomain& g, const Chain& chain) {
  const int dim = g.dim();
  const int nsub = static_cast<int>(g.spec().subdomains.size());
  if (chain.order.empty()) throw GeometryError("chain is empty");
  for (int j : chain.order) {
    if (j < 1 || j > nsub) throw GeometryError("chain references missing subdomain " + std::to_string(j));
  }
  Chain out;
  out.order = chain.order;
  const double min_radius = g.r0() / 3.0;
  for (std::size_t k = 0; k < chain.order.size(); ++k) {
    const int from = k == 0 ? 0 : chain.order[k - 1];
    const int to = chain.order[k];
    const std::string link = "chain link " + std::to_string(k + 1) + " (D_" + std::to_string(from) + " -> D_" +
                             std::to_string(to) + ")";
    PatchStats best;
    int best_axis = -1;
    for (int a = 0; a < dim; ++a) {
      PatchStats st = interface_nodes(g, from, to, a);
      if (st.nodes.size() > best.nodes.size()) {
        best = std::move(st);
        best_axis = a;
      }
    }
    if (best_axis < 0 || best.nodes.empty()) throw GeometryError(link + ": no shared flat interface");

    InterfaceRecord rec;
    rec.axis = best_axis;
    rec.normal_sign = best.sign;
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};
    lo.fill(std::numeric_limits<int>::max());
    hi.fill(std::numeric_limits<int>::min());
    int plane = -1;
    for (std::size_t n : best.nodes) {
      const Index3 p = g.ijk(n);
      if (plane < 0) plane = p[best_axis];
      if (p[best_axis] != plane) throw GeometryError(link + ": interface is not a single plane");
      for (int a = 0; a < dim; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    double radius = std::numeric_limits<double>::infinity();
    Index3 center_idx{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      if (a == best_axis) {
        rec.center[a] = g.origin()[a] + g.h() * plane;
        center_idx[a] = plane;
        continue;
      }
      // Open patch nodes span [lo, hi]; the closed patch extends one spacing further.
      const double lo_x = g.origin()[a] + g.h() * (lo[a] - 1);
      const double hi_x = g.origin()[a] + g.h() * (hi[a] + 1);
      rec.center[a] = 0.5 * (lo_x + hi_x);
      radius = std::min(radius, 0.5 * (hi_x - lo_x));
      center_idx[a] = static_cast<int>(std::lround((rec.center[a] - g.origin()[a]) / g.h()));
    }
    rec.flat_radius = radius;
    rec.center_node = g.node(center_idx);
    rec.nodes = std::move(best.nodes);
    if (rec.flat_radius < min_radius - 1e-12) {
      throw GeometryError(link + ": flat radius " + fmt_double(rec.flat_radius) + " below r0/3=" + fmt_double(min_radius));
    }
    out.interfaces.push_back(std::move(rec));
  }
  return out;
}

void dump_nodes(const GridDomain& g, std::ostream& out) {
  out << "# index x y z class subdomain\n";
  out.precision(10);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Vec x = g.coords(n);
    out << n << ' ' << x[0] << ' ' << x[1] << ' ' << x[2] << ' ' << to_string(g.node_class(n)) << ' ' << g.subdomain(n)
        << '\n';
  }
}

std::uint64_t domain_hash(const GridDomain& g) {
  const DomainSpec& s = g.spec();
  Fnv1a f;
  f.str("domain").value(s.dim).value(g.h()).value(s.r0).value(g.d0_thickness());
  auto box = [&](const Box& b) {
    for (int a = 0; a < kMaxDim; ++a) f.value(b.lo[a]).value(b.hi[a]);
  };
  box(s.omega);
  for (const Box& b : s.subdomains) box(b);
  f.value(s.sigma.axis).value(static_cast<int>(s.sigma.upper)).value(static_cast<int>(s.sigma.whole_face));
  if (!s.sigma.whole_face) box(s.sigma.footprint);
  return f.digest();
}

}  // namespace lipstab
