#include "robustdet/attack/attack.hpp"
#include "robustdet/attack/dire_attack.hpp"
#include "robustdet/core/random.hpp"
#include "robustdet/diffusion/ddim.hpp"
#include "robustdet/diffusion/dire.hpp"

#include <benchmark/benchmark.h>

using namespace robustdet;

namespace {

ImageTensor images(std::size_t n, std::size_t side, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({n, 1, side, side});
    for (double& v : t.storage()) v = rng.uniform();
    return ImageTensor(std::move(t));
}

LabelVector labels(std::size_t n) {
    LabelVector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    return y;
}

model::DetectorModel detector(model::Architecture arch, model::InputSpace space = model::InputSpace::kPixel) {
    return model::DetectorModel::create({arch, space, 1, 16, 16}, 1);
}

void BM_Pgd(benchmark::State& state) {
    const auto arch = state.range(0) == 0 ? model::Architecture::kSmallConv : model::Architecture::kSmallAttention;
    const auto m = detector(arch);
    const ImageTensor x = images(64, 16, 2);
    const LabelVector y = labels(64);
    attack::AttackConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(attack::pgd(m, x, y, cfg));
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Pgd)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DdimRoundTrip(benchmark::State& state) {
    const auto schedule = diffusion::DiffusionSchedule::linear(static_cast<std::size_t>(state.range(0)));
    const auto predictor = diffusion::GaussianPredictor::untrained(1, 16, 16);
    const ImageTensor x = images(64, 16, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(diffusion::reconstruct(diffusion::invert(x, schedule, predictor), schedule, predictor));
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_DdimRoundTrip)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_PgdThroughDire(benchmark::State& state) {
    const auto m = detector(model::Architecture::kSmallConv, model::InputSpace::kDire);
    const diffusion::DireExtractor ex(diffusion::DiffusionSchedule::linear(),
                                      std::make_shared<diffusion::GaussianPredictor>(
                                          diffusion::GaussianPredictor::untrained(1, 16, 16)));
    const ImageTensor x = images(64, 16, 4);
    const LabelVector y = labels(64);
    attack::AttackConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            attack::pgd_through_dire(m, x, y, cfg, attack::GradMode::kIdentityApproximation, ex));
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_PgdThroughDire)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
    const auto m = detector(model::Architecture::kSmallConv);
    const ImageTensor x = images(64, 16, 5);
    const LabelVector y = labels(64);
    std::vector<double> grad(m.parameter_count());
    for (auto _ : state) benchmark::DoNotOptimize(m.accumulate_gradient(x, y, 1.0, grad));
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
