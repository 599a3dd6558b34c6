// OpenMP kernels against the serial reference implementations on the same inputs.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "fbslab/innovations.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/reference.hpp"
#include "fbslab/sums.hpp"

namespace {

using namespace fbslab;
using kernels::AxisKernel;
using kernels::ProductKernel;

Field random_field(const Box& box, std::uint64_t seed) {
  Engine eng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(box);
  for (double& v : f.values()) v = u(eng);
  return f;
}

ProductKernel short_kernel(Index radius) {
  return ProductKernel({AxisKernel::fractional_gamma(0.2, {1e-6, radius}), AxisKernel::fractional_gamma(0.3, {1e-6, radius})});
}

void BM_LinearField(benchmark::State& state) {
  const Index n = state.range(0);
  const ProductKernel k = short_kernel(8);
  const std::vector<Index> nn{n, n};
  const Field x = random_field(sums::weight_support(k, nn), 1);
  for (auto _ : state) benchmark::DoNotOptimize(sums::linear_field(k, x, nn, ConvolutionMethod::Direct));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_LinearFieldReference(benchmark::State& state) {
  const Index n = state.range(0);
  const ProductKernel k = short_kernel(8);
  const std::vector<Index> nn{n, n};
  const Field x = random_field(sums::weight_support(k, nn), 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::linear_field(k, x, nn));
}

void BM_Convolve(benchmark::State& state) {
  const Index n = state.range(0);
  const Field filter = random_field(Box::cube(2, -2, 2), 2);
  const Box out = Box::cube(2, 1, n);
  const Field in = random_field(out.minkowski_sum(filter.box().reflected()), 3);
  for (auto _ : state) benchmark::DoNotOptimize(convolve(in, filter, out, ConvolutionMethod::Direct));
}

void BM_ConvolveReference(benchmark::State& state) {
  const Index n = state.range(0);
  const Field filter = random_field(Box::cube(2, -2, 2), 2);
  const Box out = Box::cube(2, 1, n);
  const Field in = random_field(out.minkowski_sum(filter.box().reflected()), 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::convolve(in, filter, out));
}

void BM_AxisWeights(benchmark::State& state) {
  const auto k = AxisKernel::fractional_gamma(0.2, {1e-6, 4096});
  for (auto _ : state) benchmark::DoNotOptimize(kernels::axis_weight_table(k, state.range(0)));
}

void BM_AxisWeightsReference(benchmark::State& state) {
  const auto k = AxisKernel::fractional_gamma(0.2, {1e-6, 4096});
  for (auto _ : state) benchmark::DoNotOptimize(reference::axis_weights(k, state.range(0)));
}

void BM_SampleField(benchmark::State& state) {
  const auto model = innovations::InnovationModel::from_taps(2, {{{0, 0}, 1.0}, {{1, 0}, 0.5}}, innovations::Link::Tanh,
                                                             innovations::NoiseLaw::StandardGaussian);
  const Box region = Box::cube(2, 1, state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(innovations::sample_field(model, region, ++seed));
}

}  // namespace

BENCHMARK(BM_LinearField)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LinearFieldReference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Convolve)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvolveReference)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AxisWeights)->Arg(1024)->Arg(16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AxisWeightsReference)->Arg(1024)->Arg(16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SampleField)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
