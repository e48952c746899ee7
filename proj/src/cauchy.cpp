#include "lipstab/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lipstab/hash.hpp"

namespace lipstab {

BoundaryMetric::BoundaryMetric(const GridDomain& g, TieOrder ties) : nodes_(g.sigma_nodes()), h_(g.h()) {
  if (nodes_.empty()) throw std::invalid_argument("empty Sigma");
  const int d = g.dim();
  mass_ = std::pow(h_, d - 1);
  std::array<int, 2> lat{-1, -1};
  int nl = 0;
  for (int a = 0; a < d; ++a) {
    if (a != g.normal_axis()) lat[nl++] = a;
  }
  std::array<int, 2> lo{1 << 30, 1 << 30}, hi{-1, -1};
  for (std::size_t n : nodes_) {
    const Index3 p = g.ijk(n);
    for (int l = 0; l < nl; ++l) {
      lo[l] = std::min(lo[l], p[lat[l]]);
      hi[l] = std::max(hi[l], p[lat[l]]);
    }
  }
  nl_ = nl;
  for (int l = 0; l < nl; ++l) ext_[l] = hi[l] - lo[l] + 1;
  if (static_cast<std::size_t>(ext_[0]) * static_cast<std::size_t>(ext_[1]) != nodes_.size()) {
    throw std::invalid_argument("Sigma nodes do not form a rectangle");
  }
  pos_.resize(nodes_.size());
  for (std::size_t s = 0; s < nodes_.size(); ++s) {
    const Index3 p = g.ijk(nodes_[s]);
    pos_[s] = {p[lat[0]] - lo[0] + 1, nl == 2 ? p[lat[1]] - lo[1] + 1 : 1};
  }

  // Sine modes, sorted by eigenvalue; near-equal eigenvalues by wavenumber.
  struct Mode {
    double lambda;
    std::array<int, 2> k;
  };
  std::vector<Mode> modes;
  const int k2max = nl == 2 ? ext_[1] : 1;
  for (int k1 = 1; k1 <= ext_[0]; ++k1) {
    for (int k2 = 1; k2 <= k2max; ++k2) {
      const double s1 = std::sin(std::numbers::pi * k1 / (2.0 * (ext_[0] + 1)));
      double lam = 4.0 * s1 * s1;
      if (nl == 2) {
        const double s2 = std::sin(std::numbers::pi * k2 / (2.0 * (ext_[1] + 1)));
        lam += 4.0 * s2 * s2;
      }
      modes.push_back({lam / (h_ * h_), {k1, nl == 2 ? k2 : 0}});
    }
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
  for (std::size_t i = 0; i < modes.size();) {
    std::size_t j = i + 1;
    while (j < modes.size() && modes[j].lambda - modes[i].lambda <= 1e-12 * modes[i].lambda) ++j;
    std::sort(modes.begin() + static_cast<std::ptrdiff_t>(i), modes.begin() + static_cast<std::ptrdiff_t>(j),
              [ties](const Mode& a, const Mode& b) { return ties == TieOrder::lexicographic ? a.k < b.k : b.k < a.k; });
    i = j;
  }

  const auto S = static_cast<Eigen::Index>(nodes_.size());
  lambda_.resize(S);
  U_.resize(S, S);
  waves_.resize(nodes_.size());
  const double c0 = std::sqrt(2.0 / (ext_[0] + 1));
  const double c1 = nl == 2 ? std::sqrt(2.0 / (ext_[1] + 1)) : 1.0;
  for (Eigen::Index c = 0; c < S; ++c) {
    const Mode& md = modes[static_cast<std::size_t>(c)];
    lambda_(c) = md.lambda;
    waves_[static_cast<std::size_t>(c)] = md.k;
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto& p = pos_[static_cast<std::size_t>(s)];
      double v = c0 * std::sin(std::numbers::pi * md.k[0] * p[0] / (ext_[0] + 1));
      if (nl == 2) v *= c1 * std::sin(std::numbers::pi * md.k[1] * p[1] / (ext_[1] + 1));
      U_(s, c) = v;
    }
  }

  Fnv1a fh;
  fh.str("boundary-metric").value(d).value(h_).value(ext_[0]).value(ext_[1]);
  for (std::size_t n : nodes_) fh.value(static_cast<std::uint64_t>(n));
  hash_ = fh.digest();
}

std::vector<cplx> BoundaryMetric::eigenfunction(std::size_t k) const {
  if (k >= size()) throw std::out_of_range("eigenfunction index beyond Sigma size");
  std::vector<cplx> v(size());
  const double s = 1.0 / std::sqrt(mass_);
  for (std::size_t i = 0; i < size(); ++i) v[i] = U_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * s;
  return v;
}

Eigen::MatrixXd BoundaryMetric::stiffness() const {
  const auto S = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(S, S);
  const bool two = nl_ == 2;
  const double c = mass_ / (h_ * h_);
  std::vector<Eigen::Index> at(static_cast<std::size_t>(ext_[0] + 2) * static_cast<std::size_t>(ext_[1] + 2), -1);
  auto key = [&](int i, int j) { return static_cast<std::size_t>(i) + static_cast<std::size_t>(ext_[0] + 2) * static_cast<std::size_t>(j); };
  for (Eigen::Index s = 0; s < S; ++s) at[key(pos_[static_cast<std::size_t>(s)][0], pos_[static_cast<std::size_t>(s)][1])] = s;
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto& p = pos_[static_cast<std::size_t>(s)];
    K(s, s) = (two ? 4.0 : 2.0) * c;
    const std::array<std::array<int, 2>, 4> nb{{{p[0] - 1, p[1]}, {p[0] + 1, p[1]}, {p[0], p[1] - 1}, {p[0], p[1] + 1}}};
    for (int t = 0; t < (two ? 4 : 2); ++t) {
      const Eigen::Index o = at[key(nb[t][0], nb[t][1])];
      if (o >= 0) K(s, o) = -c;
    }
  }
  return K;
}

Eigen::MatrixXd BoundaryMetric::half_power() const {
  const Eigen::VectorXd d = (1.0 + normalized_eigenvalues().array()).pow(0.25);
  return std::sqrt(mass_) * U_ * d.asDiagonal() * U_.transpose();
}

Eigen::MatrixXd BoundaryMetric::neg_half_power() const {
  const Eigen::VectorXd d = (1.0 + normalized_eigenvalues().array()).pow(-0.25);
  return U_ * d.asDiagonal() * U_.transpose() / std::sqrt(mass_);
}

Eigen::VectorXcd BoundaryMetric::apply_half(const Eigen::VectorXcd& f) const {
  if (f.size() != static_cast<Eigen::Index>(size())) throw std::invalid_argument("vector does not match Sigma");
  const Eigen::VectorXd d = (1.0 + normalized_eigenvalues().array()).pow(0.25);
  const Eigen::VectorXcd c = U_.transpose().cast<cplx>() * f;
  return std::sqrt(mass_) * (U_.cast<cplx>() * (d.cast<cplx>().asDiagonal() * c));
}

Eigen::VectorXcd BoundaryMetric::apply_neg_half_density(const Eigen::VectorXcd& g) const {
  if (g.size() != static_cast<Eigen::Index>(size())) throw std::invalid_argument("vector does not match Sigma");
  const Eigen::VectorXd d = (1.0 + normalized_eigenvalues().array()).pow(-0.25);
  const Eigen::VectorXcd c = U_.transpose().cast<cplx>() * g;
  return std::sqrt(mass_) * (U_.cast<cplx>() * (d.cast<cplx>().asDiagonal() * c));
}

namespace {

Eigen::VectorXcd as_vec(const std::vector<cplx>& v) {
  return Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::VectorXcd weighted_coordinates(const BoundaryMetric& metric, const CauchyPair& pair) {
  if (pair.f.size() != metric.size() || pair.g.size() != metric.size()) {
    throw std::invalid_argument("Cauchy pair does not match the metric's Sigma");
  }
  const auto S = static_cast<Eigen::Index>(metric.size());
  Eigen::VectorXcd x(2 * S);
  x.head(S) = metric.apply_half(as_vec(pair.f));
  x.tail(S) = metric.apply_neg_half_density(as_vec(pair.g));
  return x;
}

double pair_norm(const BoundaryMetric& metric, const CauchyPair& pair) {
  return weighted_coordinates(metric, pair).norm();
}

Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& cols, double drop_tol, std::size_t* dropped) {
  Eigen::MatrixXcd Q(cols.rows(), cols.cols());
  Eigen::Index r = 0;
  std::size_t drops = 0;
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    Eigen::VectorXcd v = cols.col(c);
    const double n0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < r; ++k) v -= Q.col(k).dot(v) * Q.col(k);
    }
    const double n1 = v.norm();
    if (n0 == 0.0 || n1 <= drop_tol * n0) {
      ++drops;
      continue;
    }
    Q.col(r++) = v / n1;
  }
  if (dropped) *dropped = drops;
  return Q.leftCols(r);
}

CauchySubspace subspace_from_columns(const Eigen::MatrixXcd& cols, std::uint64_t metric_hash) {
  CauchySubspace s;
  s.basis = orthonormalize(cols, 1e-12, &s.dropped);
  s.m = static_cast<std::size_t>(cols.cols());
  s.metric_hash = metric_hash;
  s.sigma_size = static_cast<std::size_t>(cols.rows() / 2);
  return s;
}

CauchySubspace generate_cauchy_space(const LoadSolver& physical, const BoundaryMetric& metric, std::size_t m) {
  if (m == 0 || m > metric.size()) throw std::invalid_argument("m must lie in [1, |Sigma|]");
  if (physical.domain().sigma_nodes() != metric.sigma_nodes()) throw std::invalid_argument("metric built on another Sigma");
  CauchySubspace s;
  s.m = m;
  s.metric_hash = metric.hash();
  s.sigma_size = metric.size();
  s.tau = physical.bc().tau;
  for (std::size_t k = 0; k < m; ++k) s.impedance.push_back(metric.eigenfunction(k));
  const auto sols = solve_generation_problems(physical, s.impedance);
  const auto S = static_cast<Eigen::Index>(metric.size());
  Eigen::MatrixXcd cols(2 * S, static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    CauchyPair p{sigma_trace(physical.domain(), sols[k]), normal_derivative(physical, sols[k])};
    cols.col(static_cast<Eigen::Index>(k)) = weighted_coordinates(metric, p);
    s.pairs.push_back(std::move(p));
  }
  s.basis = orthonormalize(cols, 1e-12, &s.dropped);
  return s;
}

CauchySubspace generate_cauchy_space(const DomainPtr& domain, const PiecewiseLinearPotential& q,
                                     const BoundaryMetric& metric, std::size_t m, double tau) {
  DiscreteOperator op(domain, q, BcDescriptor{Region::physical, tau});
  return generate_cauchy_space(op, metric, m);
}

double one_sided(const CauchySubspace& s1, const CauchySubspace& s2) {
  if (s1.metric_hash != s2.metric_hash || s1.basis.rows() != s2.basis.rows()) {
    throw std::invalid_argument("subspaces live in different metrics");
  }
  if (s2.rank() == 0) return 0.0;
  const Eigen::MatrixXcd R = s2.basis - s1.basis * (s1.basis.adjoint() * s2.basis);
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

ApertureResult aperture(const CauchySubspace& s1, const CauchySubspace& s2) {
  ApertureResult r;
  r.gap_12 = one_sided(s1, s2);
  r.gap_21 = one_sided(s2, s1);
  r.value = std::max(r.gap_12, r.gap_21);
  r.unequal_dims = s1.rank() != s2.rank();
  return r;
}

DistanceReport distance_with_stabilization(const LoadSolver& physical1, const LoadSolver& physical2,
                                           const BoundaryMetric& metric, std::size_t m, double tol, double zero_tol) {
  DistanceReport rep;
  rep.m = m;
  const std::size_t m2 = std::min(2 * m, metric.size());
  const CauchySubspace a2 = generate_cauchy_space(physical1, metric, m2);
  const CauchySubspace b2 = generate_cauchy_space(physical2, metric, m2);
  // The first m generated pairs span the m-space; reuse them.
  auto head = [&](const CauchySubspace& s) {
    const auto S = static_cast<Eigen::Index>(metric.size());
    Eigen::MatrixXcd cols(2 * S, static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) cols.col(static_cast<Eigen::Index>(k)) = weighted_coordinates(metric, s.pairs[k]);
    return subspace_from_columns(cols, metric.hash());
  };
  rep.at_m = aperture(head(a2), head(b2));
  rep.at_2m = aperture(a2, b2);
  const double big = std::max(rep.at_m.value, rep.at_2m.value);
  rep.rel_change = big <= zero_tol ? 0.0 : std::abs(rep.at_2m.value - rep.at_m.value) / big;
  rep.stable = rep.rel_change <= tol;
  return rep;
}

void write_subspace(const CauchySubspace& s, std::ostream& out) {
  std::ostringstream hex;
  hex << std::hex << s.metric_hash;
  out << "lipstab-subspace m=" << s.m << " sigma=" << s.sigma_size << " rank=" << s.rank() << " rows=" << s.basis.rows()
      << " metric=" << hex.str() << "\n";
  for (Eigen::Index c = 0; c < s.basis.cols(); ++c) {
    for (Eigen::Index r = 0; r < s.basis.rows(); ++r) {
      const double v[2] = {s.basis(r, c).real(), s.basis(r, c).imag()};
      out.write(reinterpret_cast<const char*>(v), sizeof v);
    }
  }
}

CauchySubspace read_subspace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("lipstab-subspace ", 0) != 0) throw std::runtime_error("not a subspace dump");
  CauchySubspace s;
  std::istringstream hs(line.substr(17));
  std::string tok;
  std::size_t rank = 0, rows = 0;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed subspace header");
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "m") s.m = std::stoul(v);
    else if (k == "sigma") s.sigma_size = std::stoul(v);
    else if (k == "rank") rank = std::stoul(v);
    else if (k == "rows") rows = std::stoul(v);
    else if (k == "metric") s.metric_hash = std::stoull(v, nullptr, 16);
  }
  s.basis.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rank));
  for (Eigen::Index c = 0; c < s.basis.cols(); ++c) {
    for (Eigen::Index r = 0; r < s.basis.rows(); ++r) {
      double v[2];
      if (!in.read(reinterpret_cast<char*>(v), sizeof v)) throw std::runtime_error("truncated subspace dump");
      s.basis(r, c) = cplx(v[0], v[1]);
    }
  }
  return s;
}

}  // namespace lipstab
