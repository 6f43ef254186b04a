#include <benchmark/benchmark.h>

#include <vector>

#include "harfuse/cca.hpp"
#include "harfuse/cnn.hpp"
#include "harfuse/domain_transforms.hpp"
#include "harfuse/linalg.hpp"
#include "harfuse/rng.hpp"
#include "harfuse/signal_image.hpp"

using namespace harfuse;
using linalg::Matrix;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = standard_normal(rng);
  return m;
}

void BM_Dft2(benchmark::State& state) {
  const Matrix img = random_matrix(kImageRows, kImageCols, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dft2(img));
}
BENCHMARK(BM_Dft2);

void BM_GaborResponse(benchmark::State& state) {
  const Matrix img = random_matrix(kImageRows, kImageCols, 2);
  const GaborBank bank = GaborBank::standard();
  for (auto _ : state) benchmark::DoNotOptimize(gabor_response(img, bank));
}
BENCHMARK(BM_GaborResponse);

void BM_CnnForward(benchmark::State& state) {
  const CnnModel m = CnnModel::initialized(CnnArchitecture{}, 3);
  std::vector<Matrix> batch;
  for (int i = 0; i < state.range(0); ++i) batch.push_back(random_matrix(kImageRows, kImageCols, 10 + i));
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CnnForward)->Arg(1)->Arg(64);

void BM_CnnLossAndGradient(benchmark::State& state) {
  const CnnModel m = CnnModel::initialized(CnnArchitecture{}, 4);
  std::vector<Matrix> batch;
  std::vector<int> labels;
  for (int i = 0; i < 64; ++i) {
    batch.push_back(random_matrix(kImageRows, kImageCols, 100 + i));
    labels.push_back(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(m, batch, labels, 0.004));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_CnnLossAndGradient);

void BM_SymEig(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(2 * p, p, 5);
  const Matrix s = linalg::covariance(a);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::sym_eig(s));
}
BENCHMARK(BM_SymEig)->Arg(16)->Arg(100);

void BM_FitCca(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(400, p, 6);
  const Matrix y = random_matrix(400, p, 7);
  for (auto _ : state) benchmark::DoNotOptimize(fit_cca(x, y, 1e-4));
}
BENCHMARK(BM_FitCca)->Arg(16)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
