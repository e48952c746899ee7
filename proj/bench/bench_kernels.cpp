#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lipstab/cauchy.hpp"
#include "lipstab/fixtures.hpp"
#include "lipstab/kernels.hpp"
#include "lipstab/layered.hpp"
#include "lipstab/pde.hpp"

using namespace lipstab;

namespace {

PiecewiseLinearPotential normal_only() {
  std::vector<AffinePiece> p(2);
  p[0].a = 1.2;
  p[0].A = {0.0, 0.0, -0.8};
  p[1].a = -1.0;
  p[1].A = {0.0, 0.0, 0.6};
  return {3, p, 3.0};
}

std::vector<ComplexField> random_loads(const LoadSolver& op, std::size_t count) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<ComplexField> loads;
  for (std::size_t k = 0; k < count; ++k) {
    ComplexField f(op.domain_ptr());
    for (std::size_t i : op.active_nodes()) f[i] = cplx(n(rng), n(rng));
    loads.push_back(std::move(f));
  }
  return loads;
}

void BM_SparseFactorize(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / st.range(0));
  for (auto _ : st) {
    DiscreteOperator op(dom, normal_only(), BcDescriptor{});
    benchmark::DoNotOptimize(op.factorized());
  }
}
BENCHMARK(BM_SparseFactorize)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SparseSolve(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / st.range(0));
  DiscreteOperator op(dom, normal_only(), BcDescriptor{});
  const auto loads = random_loads(op, 1);
  for (auto _ : st) benchmark::DoNotOptimize(op.solve_load(loads[0]));
}
BENCHMARK(BM_SparseSolve)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LayeredSolve(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / st.range(0));
  LayeredSolver op(dom, normal_only());
  const auto loads = random_loads(op, 1);
  for (auto _ : st) benchmark::DoNotOptimize(op.solve_load(loads[0]));
}
BENCHMARK(BM_LayeredSolve)->Arg(8)->Arg(12)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_MultiLoadParallel(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 12);
  DiscreteOperator op(dom, normal_only(), BcDescriptor{});
  const auto loads = random_loads(op, 16);
  for (auto _ : st) benchmark::DoNotOptimize(op.solve_loads(loads));
}
BENCHMARK(BM_MultiLoadParallel)->Unit(benchmark::kMillisecond);

void BM_MultiLoadSerial(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 12);
  DiscreteOperator op(dom, normal_only(), BcDescriptor{});
  const auto loads = random_loads(op, 16);
  for (auto _ : st) benchmark::DoNotOptimize(op.solve_loads_serial(loads));
}
BENCHMARK(BM_MultiLoadSerial)->Unit(benchmark::kMillisecond);

void BM_ApplyOperator(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / st.range(0));
  DiscreteOperator op(dom, normal_only(), BcDescriptor{}, false);
  const auto v = random_loads(op, 1);
  for (auto _ : st) benchmark::DoNotOptimize(op.apply(v[0]));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(op.active_nodes().size()));
}
BENCHMARK(BM_ApplyOperator)->Arg(16)->Arg(32)->Arg(64);

std::vector<double> values(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void BM_BlockedSum(benchmark::State& st) {
  const auto v = values(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::blocked_sum<double>(v.size(), [&](std::size_t i) { return v[i]; }));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_BlockedSum)->Arg(1 << 16)->Arg(1 << 22);

void BM_SerialSum(benchmark::State& st) {
  const auto v = values(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial_sum<double>(v.size(), [&](std::size_t i) { return v[i]; }));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_SerialSum)->Arg(1 << 16)->Arg(1 << 22);

void BM_CauchySpace(benchmark::State& st) {
  auto dom = make_domain(fixtures::two_half_cube(3), 1.0 / 12);
  const BoundaryMetric bm(*dom);
  DiscreteOperator op(dom, normal_only(), BcDescriptor{Region::physical});
  for (auto _ : st) benchmark::DoNotOptimize(generate_cauchy_space(op, bm, static_cast<std::size_t>(st.range(0))));
}
BENCHMARK(BM_CauchySpace)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
