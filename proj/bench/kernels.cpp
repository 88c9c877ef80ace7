// Serial reference vs OpenMP for the hot kernels. Set OMP_NUM_THREADS to vary
// the thread count; on a single core the two columns should roughly agree.
#include <benchmark/benchmark.h>

#include <random>

#include "imls/compaction.hpp"
#include "imls/metrics.hpp"
#include "imls/renderer.hpp"
#include "imls/sampling.hpp"
#include "imls/transfer_function.hpp"
#include "imls/volume.hpp"

using namespace imls;

namespace {

struct Scene {
    Volume volume = generate_synthetic_volume(SyntheticKind::Spheres, {48, 48, 48}, 1);
    TransferFunction tf = TransferFunction::default_ramp();
    RenderConfig cfg;
    ViewParams view;
    Scene() {
        cfg.resolution = 96;
        cfg.sample_distance = 0.02;
    }
};

const Scene& scene() {
    static const Scene s;
    return s;
}

Image noise_image(int size, std::uint32_t seed) {
    Image img(size, size, 3);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& x : img.data) x = u(rng);
    return img;
}

void BM_RenderSerial(benchmark::State& st) {
    const auto& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(render_image(s.volume, s.tf, s.cfg, s.view));
}
void BM_RenderParallel(benchmark::State& st) {
    const auto& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(render_image_parallel(s.volume, s.tf, s.cfg, s.view));
}

template <Execution E>
void BM_Compact(benchmark::State& st) {
    const int m = static_cast<int>(st.range(0));
    const auto map = build_compaction_map(downsampling_pattern(m, 2), m / 2);
    const auto img = noise_image(m, 1);
    for (auto _ : st) benchmark::DoNotOptimize(compact(map, img, E));
}

template <Execution E>
void BM_Decompact(benchmark::State& st) {
    const int m = static_cast<int>(st.range(0));
    const auto map = build_compaction_map(downsampling_pattern(m, 2), m / 2);
    const auto c = noise_image(m / 2, 2);
    for (auto _ : st) benchmark::DoNotOptimize(decompact(map, c, E));
}

template <Execution E>
void BM_Ssim(benchmark::State& st) {
    const int m = static_cast<int>(st.range(0));
    const auto a = noise_image(m, 3), b = noise_image(m, 4);
    for (auto _ : st) benchmark::DoNotOptimize(ssim(a, b, E));
}

template <Execution E>
void BM_BlueNoise(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(blue_noise_pattern(n, 5, E));
}

}  // namespace

BENCHMARK(BM_RenderSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderParallel)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Compact, Execution::Serial)->Arg(256)->Arg(512);
BENCHMARK_TEMPLATE(BM_Compact, Execution::Parallel)->Arg(256)->Arg(512);
BENCHMARK_TEMPLATE(BM_Decompact, Execution::Serial)->Arg(256)->Arg(512);
BENCHMARK_TEMPLATE(BM_Decompact, Execution::Parallel)->Arg(256)->Arg(512);
BENCHMARK_TEMPLATE(BM_Ssim, Execution::Serial)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK_TEMPLATE(BM_Ssim, Execution::Parallel)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK_TEMPLATE(BM_BlueNoise, Execution::Serial)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_BlueNoise, Execution::Parallel)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
