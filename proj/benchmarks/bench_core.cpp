#include <random>

#include <benchmark/benchmark.h>

#include <htp/hpc.hpp>
#include <htp/kernels.hpp>
#include <htp/learning.hpp>
#include <htp/marginals.hpp>

namespace {

htp::Points angles(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 6.283185307179586);
  htp::Points x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) << u(rng), u(rng);
  return x;
}

htp::HpcModel model(Eigen::Index n, htp::MarginalFamily family) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
  const htp::KernelSpec k{htp::KernelFamily::von_mises, 1.0, 2.0, 0.05};
  return htp::HpcModel::make(angles(n, 1), y, 3, k, {{family, 2.0}, 1.0});
}

void BM_Warp(benchmark::State& state) {
  const htp::CopulaTransform t{{static_cast<htp::MarginalFamily>(state.range(0)), 2.0}, 1.0};
  double z = -4.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(htp::warp(t, z));
    z = z > 4.0 ? -4.0 : z + 1e-3;
  }
}
BENCHMARK(BM_Warp)->DenseRange(0, 3);

void BM_KernelMatrix(benchmark::State& state) {
  const htp::Points x = angles(state.range(0), 2);
  const htp::KernelSpec k{htp::KernelFamily::von_mises, 1.0, 2.0, 0.05};
  for (auto _ : state) benchmark::DoNotOptimize(htp::kernel_matrix(k, x));
}
BENCHMARK(BM_KernelMatrix)->Arg(50)->Arg(100)->Arg(200);

void BM_FindMode(benchmark::State& state) {
  const htp::HpcModel m = model(state.range(0), htp::MarginalFamily::laplace);
  for (auto _ : state) benchmark::DoNotOptimize(htp::find_mode(m));
}
BENCHMARK(BM_FindMode)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_EvidenceGradients(benchmark::State& state) {
  const htp::HpcModel m = model(state.range(0), htp::MarginalFamily::laplace);
  const htp::LaplaceState st = htp::find_mode(m);
  for (auto _ : state) benchmark::DoNotOptimize(htp::evidence_gradients(m, st));
}
BENCHMARK(BM_EvidenceGradients)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
