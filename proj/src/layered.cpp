#include "lipstab/layered.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

extern "C" void zgtsv_(const int* n, const int* nrhs, std::complex<double>* dl, std::complex<double>* d,
                       std::complex<double>* du, std::complex<double>* b, const int* ldb, int* info);

namespace lipstab {

struct LayeredSolver::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

namespace {

struct AlignedBuffer {
  double* p = nullptr;
  explicit AlignedBuffer(std::size_t n) : p(static_cast<double*>(fftw_malloc(sizeof(double) * (n ? n : 1)))) {
    if (!p) throw std::bad_alloc();
  }
  ~AlignedBuffer() { fftw_free(p); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
};

std::vector<double> layered_potential(const GridDomain& g, const PiecewiseLinearPotential& q) {
  return sample_nodes(q.extended() ? q : extend_to_omega0(q, g), g);
}

}  // namespace

bool LayeredSolver::supports(const GridDomain& g, const std::vector<double>& q, std::string* why) {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  if (q.size() != g.node_count()) return fail("potential samples do not match the grid");
  const int na = g.normal_axis();
  for (int a = 0; a < g.dim(); ++a) {
    if (g.counts()[a] < 3) return fail("grid too small");
  }
  const int last = g.counts()[na] - 1;
  if (g.sigma0_plane() != 0 && g.sigma0_plane() != last) return fail("Sigma_0 is not a grid face");
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Index3 p = g.ijk(n);
    bool lateral_edge = false;
    for (int a = 0; a < g.dim(); ++a) {
      if (a != na && (p[a] == 0 || p[a] == g.counts()[a] - 1)) lateral_edge = true;
    }
    const bool far_end = p[na] == (g.sigma0_plane() == 0 ? last : 0);
    const bool expect_active = !lateral_edge && !far_end;
    if (g.active_augmented(n) != expect_active) return fail("Omega_0 is not the full grid box");
    if (expect_active && (g.node_class(n) == NodeClass::impedance_boundary) != (p[na] == g.sigma0_plane())) {
      return fail("Sigma_0 does not cover the far face");
    }
  }
  // q constant on each plane.
  std::vector<double> qp(static_cast<std::size_t>(g.counts()[na]), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (!g.active_augmented(n)) continue;
    const auto k = static_cast<std::size_t>(g.ijk(n)[na]);
    if (std::isnan(qp[k])) {
      qp[k] = q[n];
    } else if (std::abs(qp[k] - q[n]) > 1e-13 * (1.0 + std::abs(qp[k]))) {
      return fail("potential varies within a plane");
    }
  }
  return true;
}

LayeredSolver::LayeredSolver(DomainPtr domain, std::vector<double> q_nodes, double tau)
    : LoadSolver(std::move(domain), std::move(q_nodes), BcDescriptor{Region::augmented, tau}) {
  const GridDomain& g = *domain_;
  std::string why;
  if (!supports(g, q_, &why)) throw std::invalid_argument("layered solver not applicable: " + why);
  const int na = g.normal_axis();
  int nl = 0;
  for (int a = 0; a < g.dim(); ++a) {
    if (a == na) continue;
    lateral_[nl] = a;
    nlat_[nl] = g.counts()[a] - 2;
    ++nl;
  }
  modes_ = static_cast<std::size_t>(nlat_[0]) * static_cast<std::size_t>(nlat_[1]);
  const int last = g.counts()[na] - 1;
  planes_ = static_cast<std::size_t>(last);
  grid_plane_.resize(planes_);
  q_plane_.resize(planes_);
  for (std::size_t p = 0; p < planes_; ++p) {
    grid_plane_[p] = g.sigma0_plane() == 0 ? static_cast<int>(p) : last - static_cast<int>(p);
    Index3 c{1, 1, 1};
    for (int a = 0; a < kMaxDim; ++a) {
      if (a >= g.dim()) c[a] = 0;
    }
    c[na] = grid_plane_[p];
    q_plane_[p] = q_[g.node(c)];
  }
  mu_.resize(modes_);
  for (int k1 = 0; k1 < nlat_[1]; ++k1) {
    for (int k0 = 0; k0 < nlat_[0]; ++k0) {
      double mu = 0.0;
      const double s0 = std::sin(std::numbers::pi * (k0 + 1) / (2.0 * (nlat_[0] + 1)));
      mu += 4.0 * s0 * s0;
      if (nl == 2) {
        const double s1 = std::sin(std::numbers::pi * (k1 + 1) / (2.0 * (nlat_[1] + 1)));
        mu += 4.0 * s1 * s1;
      }
      mu_[static_cast<std::size_t>(k0) + static_cast<std::size_t>(nlat_[0]) * static_cast<std::size_t>(k1)] = mu;
    }
  }
  plan_ = std::make_unique<Plan>();
  AlignedBuffer buf(modes_);
  if (nl == 2) {
    plan_->plan = fftw_plan_r2r_2d(nlat_[1], nlat_[0], buf.p, buf.p, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
  } else {
    plan_->plan = fftw_plan_r2r_1d(nlat_[0], buf.p, buf.p, FFTW_RODFT00, FFTW_ESTIMATE);
  }
  if (!plan_->plan) throw std::runtime_error("FFTW plan creation failed");
}

LayeredSolver::LayeredSolver(DomainPtr domain, const PiecewiseLinearPotential& q, double tau)
    : LayeredSolver(domain, layered_potential(*domain, q), tau) {}

LayeredSolver::~LayeredSolver() = default;

ComplexField LayeredSolver::solve_load(const ComplexField& load) const {
  check_conforming(load);
  const GridDomain& g = *domain_;
  const int d = g.dim();
  const int na = g.normal_axis();
  const double h = g.h();
  const double c = std::pow(h, d - 2);
  const double wd = std::pow(h, d);
  const std::size_t K = modes_;
  const std::size_t P = planes_;
  std::vector<cplx> hat(P * K);

  auto node_of = [&](std::size_t p, std::size_t k) {
    Index3 idx{0, 0, 0};
    idx[na] = grid_plane_[p];
    idx[lateral_[0]] = static_cast<int>(k % static_cast<std::size_t>(nlat_[0])) + 1;
    if (d == 3) idx[lateral_[1]] = static_cast<int>(k / static_cast<std::size_t>(nlat_[0])) + 1;
    return g.node(idx);
  };

#pragma omp parallel
  {
    AlignedBuffer re(K);
    AlignedBuffer im(K);
#pragma omp for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(P); ++pp) {
      const auto p = static_cast<std::size_t>(pp);
      for (std::size_t k = 0; k < K; ++k) {
        const cplx v = load[node_of(p, k)];
        re.p[k] = v.real();
        im.p[k] = v.imag();
      }
      fftw_execute_r2r(plan_->plan, re.p, re.p);
      fftw_execute_r2r(plan_->plan, im.p, im.p);
      for (std::size_t k = 0; k < K; ++k) hat[p * K + k] = cplx(re.p[k], im.p[k]);
    }
  }

  const int n = static_cast<int>(P);
  const cplx imp(0.0, bc_.tau * surface_w_);
#pragma omp parallel
  {
    std::vector<cplx> dl(P), dd(P), du(P), b(P);
#pragma omp for schedule(static)
    for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(K); ++kk) {
      const auto k = static_cast<std::size_t>(kk);
      const double mu = mu_[k];
      for (std::size_t p = 0; p < P; ++p) {
        if (p == 0) {
          dd[p] = -c * (1.0 + 0.5 * mu) - imp + 0.5 * wd * q_plane_[p];
        } else {
          dd[p] = -c * (2.0 + mu) + wd * q_plane_[p];
        }
        if (p + 1 < P) {
          dl[p] = c;
          du[p] = c;
        }
        b[p] = hat[p * K + k];
      }
      const int one = 1;
      int info = 0;
      zgtsv_(&n, &one, dl.data(), dd.data(), du.data(), b.data(), &n, &info);
      if (info != 0) {
        for (std::size_t p = 0; p < P; ++p) b[p] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
      }
      for (std::size_t p = 0; p < P; ++p) hat[p * K + k] = b[p];
    }
  }

  double scale = 1.0 / (2.0 * (nlat_[0] + 1));
  if (d == 3) scale /= 2.0 * (nlat_[1] + 1);
  ComplexField out(domain_);
#pragma omp parallel
  {
    AlignedBuffer re(K);
    AlignedBuffer im(K);
#pragma omp for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(P); ++pp) {
      const auto p = static_cast<std::size_t>(pp);
      for (std::size_t k = 0; k < K; ++k) {
        re.p[k] = hat[p * K + k].real();
        im.p[k] = hat[p * K + k].imag();
      }
      fftw_execute_r2r(plan_->plan, re.p, re.p);
      fftw_execute_r2r(plan_->plan, im.p, im.p);
      for (std::size_t k = 0; k < K; ++k) out[node_of(p, k)] = cplx(re.p[k], im.p[k]) * scale;
    }
  }
  if (!out.finite()) throw std::runtime_error("layered solve produced non-finite values");
  return out;
}

std::vector<ComplexField> LayeredSolver::solve_loads(std::span<const ComplexField> loads) const {
  return solve_loads_serial(loads);
}

std::unique_ptr<LoadSolver> make_augmented_solver(DomainPtr domain, const PiecewiseLinearPotential& q, double tau) {
  std::vector<double> qn = layered_potential(*domain, q);
  if (LayeredSolver::supports(*domain, qn)) return std::make_unique<LayeredSolver>(domain, std::move(qn), tau);
  return std::make_unique<DiscreteOperator>(domain, std::move(qn), BcDescriptor{Region::augmented, tau});
}

}  // namespace lipstab
