#include "lipstab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lipstab {

PiecewiseLinearPotential::PiecewiseLinearPotential(int dim, std::vector<AffinePiece> pieces, double e0_bound)
    : dim_(dim), pieces_(std::move(pieces)), e0_(e0_bound) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("potential dim must be 2 or 3");
  for (auto& p : pieces_) {
    for (int a = dim; a < kMaxDim; ++a) p.A[a] = 0.0;
  }
}

const AffinePiece& PiecewiseLinearPotential::piece(int j) const {
  if (j == 0) {
    if (!d0_) throw std::out_of_range("potential is not extended to D_0");
    return *d0_;
  }
  if (j < 1 || j > static_cast<int>(pieces_.size())) throw std::out_of_range("no potential piece " + std::to_string(j));
  return pieces_[static_cast<std::size_t>(j - 1)];
}

std::vector<double> PiecewiseLinearPotential::coefficients() const {
  std::vector<double> th;
  th.reserve(pieces_.size() * static_cast<std::size_t>(dim_ + 1));
  for (const auto& p : pieces_) {
    th.push_back(p.a);
    for (int a = 0; a < dim_; ++a) th.push_back(p.A[a]);
  }
  return th;
}

PiecewiseLinearPotential PiecewiseLinearPotential::from_coefficients(int dim, std::span<const double> theta,
                                                                     double e0_bound) {
  const auto stride = static_cast<std::size_t>(dim + 1);
  if (theta.size() % stride != 0) throw std::invalid_argument("coefficient vector length is not a multiple of dim+1");
  std::vector<AffinePiece> pieces(theta.size() / stride);
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    pieces[j].a = theta[j * stride];
    for (int a = 0; a < dim; ++a) pieces[j].A[a] = theta[j * stride + 1 + a];
  }
  return {dim, std::move(pieces), e0_bound};
}

double PiecewiseLinearPotential::coeff_norm() const {
  double m = 0.0;
  for (const auto& p : pieces_) {
    const double g = std::sqrt(p.A[0] * p.A[0] + p.A[1] * p.A[1] + p.A[2] * p.A[2]);
    m = std::max(m, std::abs(p.a) + g);
  }
  return m;
}

PiecewiseLinearPotential PiecewiseLinearPotential::with_d0(const AffinePiece& p) const {
  PiecewiseLinearPotential r = *this;
  r.d0_ = p;
  return r;
}

PiecewiseLinearPotential operator-(const PiecewiseLinearPotential& l, const PiecewiseLinearPotential& r) {
  if (l.dim_ != r.dim_ || l.pieces_.size() != r.pieces_.size()) {
    throw std::invalid_argument("potentials live on different partitions");
  }
  std::vector<AffinePiece> p(l.pieces_.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j].a = l.pieces_[j].a - r.pieces_[j].a;
    for (int a = 0; a < kMaxDim; ++a) p[j].A[a] = l.pieces_[j].A[a] - r.pieces_[j].A[a];
  }
  PiecewiseLinearPotential d(l.dim_, std::move(p), l.e0_ + r.e0_);
  if (l.d0_ && r.d0_) {
    AffinePiece z;
    z.a = l.d0_->a - r.d0_->a;
    for (int a = 0; a < kMaxDim; ++a) z.A[a] = l.d0_->A[a] - r.d0_->A[a];
    d.d0_ = z;
  }
  return d;
}

double eval(const PiecewiseLinearPotential& q, const GridDomain& domain, std::size_t node) {
  if (q.size() != domain.spec().subdomains.size()) throw std::invalid_argument("potential does not match the partition");
  const int label = domain.subdomain(node);
  if (label < 0 || (label == 0 && !q.extended())) {
    throw std::out_of_range("node " + std::to_string(node) + " lies outside the closed domain of the potential");
  }
  return q.piece(label)(domain.coords(node));
}

double sup_norm(const PiecewiseLinearPotential& q, const GridDomain& domain) {
  const auto& subs = domain.spec().subdomains;
  if (q.size() != subs.size()) throw std::invalid_argument("potential does not match the partition");
  const int dim = domain.dim();
  double m = 0.0;
  for (std::size_t j = 0; j < subs.size(); ++j) {
    for (int c = 0; c < (1 << dim); ++c) {
      Vec x{};
      for (int a = 0; a < dim; ++a) x[a] = ((c >> a) & 1) ? subs[j].hi[a] : subs[j].lo[a];
      m = std::max(m, std::abs(q.pieces()[j](x)));
    }
  }
  return m;
}

PiecewiseLinearPotential extend_to_omega0(const PiecewiseLinearPotential& q, const GridDomain& domain) {
  if (q.size() != domain.spec().subdomains.size()) throw std::invalid_argument("potential does not match the partition");
  AffinePiece one;
  one.a = 1.0;
  return q.with_d0(one);
}

std::vector<double> sample_nodes(const PiecewiseLinearPotential& q, const GridDomain& domain) {
  std::vector<double> v(domain.node_count(), 0.0);
  for (std::size_t n = 0; n < v.size(); ++n) {
    const int label = domain.subdomain(n);
    if (label > 0 || (label == 0 && q.extended())) v[n] = q.piece(label)(domain.coords(n));
  }
  return v;
}

}  // namespace lipstab
