// Serial reference kernels vs the OpenMP / GEMM kernels, on the layer
// shapes of the SR network (16x16 LR body, 32x32 and 64x64 after upsampling).
//
//   mbsr_bench --benchmark_filter=Conv
#include <benchmark/benchmark.h>

#include "mbsr/kernels.hpp"
#include "mbsr/model.hpp"
#include "mbsr/rng.hpp"

namespace {

using mbsr::Tensor;

Tensor<float> random_tensor(std::size_t c, std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor<float> t(c, n, h, w);
  mbsr::SplitMix64 r(seed);
  for (auto& v : t.data) v = static_cast<float>(r.uniform(-1.0, 1.0));
  return t;
}

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::vector<float> v(n);
  mbsr::SplitMix64 r(seed);
  for (auto& x : v) x = static_cast<float>(r.uniform(-1.0, 1.0));
  return v;
}

// Args: cin, cout, spatial size; batch fixed at 16.
struct ConvCase {
  Tensor<float> in, out, grad_out, grad_in;
  std::vector<float> w, b, gw, gb, col;
  std::size_t cout;

  explicit ConvCase(const benchmark::State& st)
      : in(random_tensor(st.range(0), 16, st.range(2), st.range(2), 1)),
        grad_out(random_tensor(st.range(1), 16, st.range(2), st.range(2), 2)),
        grad_in(st.range(0), 16, st.range(2), st.range(2)),
        w(random_vec(st.range(0) * st.range(1) * 9, 3)),
        b(random_vec(st.range(1), 4)),
        gw(w.size()),
        gb(b.size()),
        cout(st.range(1)) {}

  double flops() const { return 2.0 * double(in.c * cout * 9 * in.n * in.h * in.w); }
};

void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1, 32, 16})->Args({32, 32, 16})->Args({32, 128, 16})->Args({32, 128, 32})->Args({32, 1, 64});
  b->Unit(benchmark::kMicrosecond);
}

void BM_ConvForward_Reference(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    mbsr::kernels::reference::conv3x3_forward<float>(c.in, c.w, c.b, c.cout, c.out);
    benchmark::DoNotOptimize(c.out.data.data());
  }
  st.counters["GFLOP/s"] = benchmark::Counter(c.flops(), benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvForward_Reference)->Apply(conv_shapes);

void BM_ConvForward_Parallel(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    mbsr::kernels::conv3x3_forward<float>(c.in, c.w, c.b, c.cout, c.out, c.col);
    benchmark::DoNotOptimize(c.out.data.data());
  }
  st.counters["GFLOP/s"] = benchmark::Counter(c.flops(), benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvForward_Parallel)->Apply(conv_shapes);

void BM_ConvBackward_Reference(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    mbsr::kernels::reference::conv3x3_backward<float>(c.in, c.grad_out, c.w, c.gw, c.gb, &c.grad_in);
    benchmark::DoNotOptimize(c.grad_in.data.data());
  }
  st.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * c.flops(), benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvBackward_Reference)->Apply(conv_shapes);

void BM_ConvBackward_Parallel(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    mbsr::kernels::conv3x3_backward<float>(c.in, c.grad_out, c.w, c.gw, c.gb, &c.grad_in, c.col);
    benchmark::DoNotOptimize(c.grad_in.data.data());
  }
  st.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * c.flops(), benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvBackward_Parallel)->Apply(conv_shapes);

void BM_DepthToSpace_Reference(benchmark::State& st) {
  const auto t = random_tensor(128, 16, 16, 16, 5);
  for (auto _ : st) benchmark::DoNotOptimize(mbsr::kernels::reference::depth_to_space(t, 2).data.data());
}
BENCHMARK(BM_DepthToSpace_Reference)->Unit(benchmark::kMicrosecond);

void BM_DepthToSpace_Parallel(benchmark::State& st) {
  const auto t = random_tensor(128, 16, 16, 16, 5);
  for (auto _ : st) benchmark::DoNotOptimize(mbsr::kernels::depth_to_space(t, 2).data.data());
}
BENCHMARK(BM_DepthToSpace_Parallel)->Unit(benchmark::kMicrosecond);

// Whole training step (forward + backward) of a desk-scale network.
void BM_TrainStep(benchmark::State& st) {
  const mbsr::SrModelConfig cfg{3, static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)), 4, 4};
  const auto model = mbsr::init_model<float>(cfg, 1);
  auto x = random_tensor(3, 16, 16, 16, 6);
  auto y = random_tensor(1, 16, 64, 64, 7);
  for (auto _ : st) benchmark::DoNotOptimize(mbsr::loss_and_gradients(model, x, y).loss);
}
BENCHMARK(BM_TrainStep)->Args({16, 3})->Args({32, 5})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
