// Serial reference versus OpenMP kernels. Run with OMP_NUM_THREADS set to
// the core count to see the speedup.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "bohm/kernels.hpp"

using namespace bohm;
using bohm::kernels::cplx;
namespace ks = bohm::kernels::serial;
namespace ko = bohm::kernels::omp;

namespace {

const Grid& plane() {
  static const Grid g({{256, -20.0, 20.0}, {256, -20.0, 20.0}});
  return g;
}

std::vector<cplx> field(std::size_t n) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::vector<cplx> v(n);
  for (auto& c : v) c = {normal(gen), normal(gen)};
  return v;
}

VelocityField velocity(double shift) {
  const Grid& g = plane();
  VelocityField v;
  v.grid = g;
  v.components.assign(2, std::vector<double>(g.total_points()));
  for (std::size_t i = 0; i < g.total_points(); ++i) {
    v.components[0][i] = std::sin(0.3 * g.coordinate(i, 1) + shift);
    v.components[1][i] = std::cos(0.2 * g.coordinate(i, 0) - shift);
  }
  v.node_mask.assign(g.total_points(), 0);
  return v;
}

std::vector<double> positions(std::size_t m) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::vector<double> x(2 * m);
  for (double& v : x) v = u(gen);
  return x;
}

template <auto Kernel>
void transform(benchmark::State& state) {
  auto data = field(plane().total_points());
  for (auto _ : state) {
    Kernel(std::span<cplx>(data), plane(), 1, false);
    Kernel(std::span<cplx>(data), plane(), 1, true);
    benchmark::DoNotOptimize(data.data());
  }
}

template <auto Kernel>
void sum(benchmark::State& state) {
  std::vector<double> v(1 << 20);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / static_cast<double>(i + 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(std::span<const double>(v)));
}

template <auto Kernel>
void rk4(benchmark::State& state) {
  const auto v0 = velocity(0.0), v1 = velocity(0.1);
  auto x = positions(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(std::span<double>(x), v0, v1, 0.01));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void sample(benchmark::State& state) {
  const Grid& g = plane();
  std::vector<double> cdf(g.total_points());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = acc += 1.0 + static_cast<double>(i % 7);
  std::vector<double> x(2 * static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Kernel(cdf, g, 7, 0, x);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(transform<ks::transform_axis>)->Name("transform_axis/serial");
BENCHMARK(transform<ko::transform_axis>)->Name("transform_axis/omp");
BENCHMARK(sum<static_cast<double (*)(std::span<const double>)>(ks::blocked_sum)>)->Name("blocked_sum/serial");
BENCHMARK(sum<static_cast<double (*)(std::span<const double>)>(ko::blocked_sum)>)->Name("blocked_sum/omp");
BENCHMARK(rk4<ks::advance_rk4>)->Name("advance_rk4/serial")->Arg(10000);
BENCHMARK(rk4<ko::advance_rk4>)->Name("advance_rk4/omp")->Arg(10000);
BENCHMARK(sample<ks::sample_cells>)->Name("sample_cells/serial")->Arg(10000);
BENCHMARK(sample<ko::sample_cells>)->Name("sample_cells/omp")->Arg(10000);

BENCHMARK_MAIN();
