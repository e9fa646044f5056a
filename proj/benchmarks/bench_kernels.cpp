#include <benchmark/benchmark.h>

#include "vox3d/eval.hpp"
#include "vox3d/models.hpp"
#include "vox3d/ops.hpp"
#include "vox3d/rng.hpp"
#include "vox3d/verify.hpp"

using namespace vox3d;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

void BM_conv3d(benchmark::State& state) {
    const int64_t cube = state.range(0);
    ConvSpec spec{8, 16, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}};
    Tensor x = random_tensor({1, 8, cube, cube, cube}, 1);
    Tensor w = random_tensor({16, 8, 3, 3, 3}, 2);
    Tensor b = random_tensor({16}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, b, spec));
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_conv3d)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_conv3d_reference(benchmark::State& state) {
    const int64_t cube = state.range(0);
    ConvSpec spec{8, 16, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}};
    Tensor x = random_tensor({1, 8, cube, cube, cube}, 1);
    Tensor w = random_tensor({16, 8, 3, 3, 3}, 2);
    Tensor b = random_tensor({16}, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(verify::conv3d_reference(x, w, b, spec));
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_conv3d_reference)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_maxpool3d(benchmark::State& state) {
    Tensor x = random_tensor({1, 64, 32, 32, 32}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(maxpool3d(x, {2, 2, 2}, {2, 2, 2}));
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_maxpool3d)->Unit(benchmark::kMillisecond);

void BM_dense(benchmark::State& state) {
    Tensor x = random_tensor({5, 13824}, 5);
    Tensor w = random_tensor({128, 13824}, 6);
    Tensor b = random_tensor({128}, 7);
    for (auto _ : state) benchmark::DoNotOptimize(dense(x, w, b));
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_dense)->Unit(benchmark::kMillisecond);

void BM_roc_auc(benchmark::State& state) {
    Rng rng(8);
    const int n = static_cast<int>(state.range(0));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        scores[static_cast<size_t>(i)] = rng.uniform();
        labels[static_cast<size_t>(i)] = static_cast<int>(rng.next_u64() & 1);
    }
    labels[0] = 0;
    labels[static_cast<size_t>(n - 1)] = 1;
    for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores, labels));
}
BENCHMARK(BM_roc_auc)->Arg(100)->Arg(10000);

void BM_voxcnn_forward(benchmark::State& state) {
    const int cube = static_cast<int>(state.range(0));
    Network net = build_voxcnn(2, 0.1f, cube, 9);
    net.set_mode(Mode::infer);
    Tensor x = random_tensor({1, 1, cube, cube, cube}, 10);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_voxcnn_forward)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
