#include <benchmark/benchmark.h>

#include "ditreuse/metrics.hpp"
#include "ditreuse/sampler.hpp"
#include "ditreuse/spearman.hpp"

using namespace ditreuse;

namespace {

const DiTWeights& toy_weights() {
    static const DiTWeights w = [] {
        ModelConfig cfg;
        cfg.seed = 1;
        return init_weights(cfg);
    }();
    return w;
}

Latent bench_latent(const ModelConfig& cfg) {
    SchedulerConfig sched;
    sched.seed = 3;
    return initial_noise(cfg, sched, 0);
}

void BM_DitForward(benchmark::State& state) {
    const DiTWeights& w = toy_weights();
    const Latent x = bench_latent(w.config);
    const ConditionEmbedding cond = condition_for_prompt(w.config, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dit_forward(x, cond, 1, w));
    }
}
BENCHMARK(BM_DitForward);

void BM_Block0Proxy(benchmark::State& state) {
    const DiTWeights& w = toy_weights();
    const Latent x = bench_latent(w.config);
    const ConditionEmbedding cond = condition_for_prompt(w.config, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(block0_proxy(x, cond, 1, TapId::cross_attn_out, w));
    }
}
BENCHMARK(BM_Block0Proxy);

// Full denoising loops at a few thresholds; threshold 0 is the no-reuse
// baseline, large thresholds approach warmup-only compute.
void BM_Generate(benchmark::State& state) {
    const DiTWeights& w = toy_weights();
    SchedulerConfig sched;
    sched.n_steps = 25;
    sched.seed = 7;
    ReuseConfig rc;
    rc.threshold = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate(0, w, sched, rc));
    }
    state.counters["reuse_ratio"] = generate(0, w, sched, rc).reuse_ratio();
}
BENCHMARK(BM_Generate)->Arg(0)->Arg(10)->Arg(160);

void BM_Decode(benchmark::State& state) {
    const DiTWeights& w = toy_weights();
    const Latent x = bench_latent(w.config);
    for (auto _ : state) {
        benchmark::DoNotOptimize(decode(x, w.config));
    }
}
BENCHMARK(BM_Decode);

void BM_Ssim(benchmark::State& state) {
    const DiTWeights& w = toy_weights();
    const FrameStack a = decode(bench_latent(w.config), w.config);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssim(a, a));
    }
}
BENCHMARK(BM_Ssim);

void BM_SpearmanRho(benchmark::State& state) {
    std::vector<double> a(state.range(0)), b(state.range(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>((i * 2654435761u) % 1000);
        b[i] = static_cast<double>((i * 40503u) % 1000);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(spearman_rho(a, b));
    }
}
BENCHMARK(BM_SpearmanRho)->Arg(50)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
