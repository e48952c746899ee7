#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace lipstab::kernels {

inline constexpr std::size_t kBlock = 4096;

/// Sum of f(0..n-1) with a fixed blocking: per-block partials in parallel, then a
/// serial pass over the partials. The result does not depend on the thread count.
template <class T, class F>
T blocked_sum(std::size_t n, F&& f) {
  const std::size_t nb = (n + kBlock - 1) / kBlock;
  std::vector<T> partial(nb, T{});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = lo + kBlock < n ? lo + kBlock : n;
    T s{};
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  T s{};
  for (const T& p : partial) s += p;
  return s;
}

/// Plain left-to-right reference.
template <class T, class F>
T serial_sum(std::size_t n, F&& f) {
  T s{};
  for (std::size_t i = 0; i < n; ++i) s += f(i);
  return s;
}

/// Max of f(0..n-1) (f >= 0), parallel.
template <class F>
double blocked_max(std::size_t n, F&& f) {
  double m = 0.0;
#pragma omp parallel for schedule(static) reduction(max : m)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const double v = f(static_cast<std::size_t>(i));
    if (v > m) m = v;
  }
  return m;
}

int max_threads();

}  // namespace lipstab::kernels
