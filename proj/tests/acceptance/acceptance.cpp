// Acceptance suite: one PASS/FAIL line per criterion.
//
//   robustdet_acceptance            run all criteria
//   robustdet_acceptance 1 5 10     run a subset
//
// Exit status is nonzero if any selected criterion fails.

#include "robustdet/advtrain/train.hpp"
#include "robustdet/attack/attack.hpp"
#include "robustdet/cli/runner.hpp"
#include "robustdet/core/error.hpp"
#include "robustdet/core/synthetic.hpp"
#include "robustdet/diffusion/ddim.hpp"
#include "robustdet/diffusion/dire.hpp"
#include "robustdet/eval/metrics.hpp"
#include "robustdet/eval/protocol.hpp"

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace robustdet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: metric arithmetic ----------------------------------------------------

struct PublishedCell {
    const char* grid;
    const char* method;
    const char* dataset;
    const char* setting;
    double acc_adv_pct, acc_clean_pct, score;
};

// Published result grids: all-set training and cross-domain training.
// Each row is (adversarial accuracy %, clean accuracy %, printed score).
const std::vector<PublishedCell>& published_cells() {
    static const std::vector<PublishedCell> cells = {
        {"all-set", "ResNet", "CelebA", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ResNet", "LFW", "wo_at", 0.00, 99.97, 0.00},
        {"all-set", "ResNet", "Selfie", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ResNet", "SFHQ", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ResNet", "SDFace", "wo_at", 0.00, 99.98, 0.00},
        {"all-set", "ResNet", "CelebA", "w_at", 99.02, 99.99, 0.99},
        {"all-set", "ResNet", "LFW", "w_at", 89.02, 99.92, 0.89},
        {"all-set", "ResNet", "Selfie", "w_at", 97.18, 99.72, 0.97},
        {"all-set", "ResNet", "SFHQ", "w_at", 99.98, 99.99, 0.99},
        {"all-set", "ResNet", "SDFace", "w_at", 70.77, 82.53, 0.85},
        {"all-set", "ViT", "CelebA", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ViT", "LFW", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ViT", "Selfie", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ViT", "SFHQ", "wo_at", 0.00, 99.99, 0.00},
        {"all-set", "ViT", "SDFace", "wo_at", 0.00, 99.85, 0.00},
        {"all-set", "ViT", "CelebA", "w_at", 99.84, 99.96, 0.99},
        {"all-set", "ViT", "LFW", "w_at", 99.01, 99.50, 0.99},
        {"all-set", "ViT", "Selfie", "w_at", 97.77, 98.89, 0.99},
        {"all-set", "ViT", "SFHQ", "w_at", 99.98, 99.98, 1.00},
        {"all-set", "ViT", "SDFace", "w_at", 75.78, 85.02, 0.89},
        {"all-set", "DIRE", "CelebA", "wo_at", 81.24, 100.0, 0.81},
        {"all-set", "DIRE", "LFW", "wo_at", 97.66, 100.0, 0.97},
        {"all-set", "DIRE", "Selfie", "wo_at", 98.07, 99.89, 0.98},
        {"all-set", "DIRE", "SFHQ", "wo_at", 99.73, 100.0, 0.99},
        {"all-set", "DIRE", "SDFace", "wo_at", 38.94, 99.89, 0.39},
        {"all-set", "DIRE", "CelebA", "w_at", 99.99, 100.0, 1.00},
        {"all-set", "DIRE", "LFW", "w_at", 100.0, 100.0, 1.00},
        {"all-set", "DIRE", "Selfie", "w_at", 99.91, 99.77, 1.00},
        {"all-set", "DIRE", "SFHQ", "w_at", 99.99, 100.0, 1.00},
        {"all-set", "DIRE", "SDFace", "w_at", 99.89, 99.89, 1.00},

        {"cross-domain", "ResNet", "CelebA", "wo_at", 0.00, 94.35, 0.00},
        {"cross-domain", "ResNet", "LFW", "wo_at", 0.00, 100.0, 0.00},
        {"cross-domain", "ResNet", "Selfie", "wo_at", 0.00, 41.36, 0.00},
        {"cross-domain", "ResNet", "SFHQ", "wo_at", 0.00, 100.0, 0.00},
        {"cross-domain", "ResNet", "SDFace", "wo_at", 0.00, 86.89, 0.00},
        {"cross-domain", "ResNet", "CelebA", "w_at", 0.55, 1.58, 0.35},
        {"cross-domain", "ResNet", "LFW", "w_at", 64.07, 92.67, 0.69},
        {"cross-domain", "ResNet", "Selfie", "w_at", 6.37, 11.05, 0.57},
        {"cross-domain", "ResNet", "SFHQ", "w_at", 99.73, 100.0, 1.00},
        {"cross-domain", "ResNet", "SDFace", "w_at", 64.50, 99.39, 0.65},
        {"cross-domain", "ViT", "CelebA", "wo_at", 0.00, 79.76, 0.00},
        {"cross-domain", "ViT", "LFW", "wo_at", 0.00, 99.89, 0.00},
        {"cross-domain", "ViT", "Selfie", "wo_at", 0.00, 10.11, 0.00},
        {"cross-domain", "ViT", "SFHQ", "wo_at", 0.00, 100.0, 0.00},
        {"cross-domain", "ViT", "SDFace", "wo_at", 0.00, 97.61, 0.00},
        {"cross-domain", "ViT", "CelebA", "w_at", 2.24, 23.61, 0.09},
        {"cross-domain", "ViT", "LFW", "w_at", 90.37, 98.34, 0.92},
        {"cross-domain", "ViT", "Selfie", "w_at", 12.77, 49.85, 0.25},
        {"cross-domain", "ViT", "SFHQ", "w_at", 99.78, 100.0, 1.00},
        {"cross-domain", "ViT", "SDFace", "w_at", 9.33, 53.83, 0.17},
        {"cross-domain", "DIRE", "CelebA", "wo_at", 0.83, 91.82, 0.01},
        {"cross-domain", "DIRE", "LFW", "wo_at", 65.51, 99.96, 0.65},
        {"cross-domain", "DIRE", "Selfie", "wo_at", 7.28, 26.11, 0.28},
        {"cross-domain", "DIRE", "SFHQ", "wo_at", 100.0, 100.0, 1.00},
        {"cross-domain", "DIRE", "SDFace", "wo_at", 78.72, 92.83, 0.85},
        {"cross-domain", "DIRE", "CelebA", "w_at", 28.00, 72.05, 0.39},
        {"cross-domain", "DIRE", "LFW", "w_at", 99.96, 99.96, 1.00},
        {"cross-domain", "DIRE", "Selfie", "w_at", 40.47, 25.60, 1.58},
        {"cross-domain", "DIRE", "SFHQ", "w_at", 100.0, 100.0, 1.00},
        {"cross-domain", "DIRE", "SDFace", "w_at", 41.06, 81.28, 0.50},
    };
    return cells;
}

Outcome metric_arithmetic() {
    std::size_t ok = 0;
    double worst = 0.0;
    std::string misses;
    for (const auto& c : published_cells()) {
        const auto s = eval::robustness_score(c.acc_adv_pct / 100.0, c.acc_clean_pct / 100.0);
        const double diff = s ? std::abs(eval::round2(*s) - c.score) : 1.0;
        worst = std::max(worst, diff);
        if (diff <= 0.01 + 1e-9) {
            ++ok;
        } else {
            misses += fmt(" %s/%s/%s/%s", c.grid, c.method, c.dataset, c.setting);
        }
    }
    const auto& all = published_cells();
    return {ok == all.size(), fmt("%zu/%zu score cells within 0.01 after rounding (max |diff| %.2f)%s", ok, all.size(),
                                  worst, misses.c_str())};
}

// --- 2: eps-ball containment -------------------------------------------------

Outcome ball_containment() {
    Rng rng(2024);
    const model::Architecture archs[] = {model::Architecture::kSmallConv, model::Architecture::kSmallAttention,
                                         model::Architecture::kLinear};
    std::size_t violations = 0, outputs = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto arch = archs[rng.below(3)];
        const std::size_t c = rng.below(2) == 0 ? 1 : 3;
        const std::size_t n = 1 + rng.below(4);
        const auto m = model::DetectorModel::create({arch, model::InputSpace::kPixel, c, 16, 16}, rng.next());
        const ImageTensor x = robustdet::testing::random_images(n, c, 16, 16, rng.next());
        LabelVector y(n);
        for (int& v : y) v = static_cast<int>(rng.below(2));
        attack::AttackConfig cfg;
        cfg.epsilon = rng.uniform(0.0, 0.3);
        cfg.step_size = cfg.epsilon * rng.uniform(0.05, 1.5);
        cfg.num_steps = 1 + rng.below(12);
        cfg.random_init = rng.below(2) == 1;
        cfg.seed = rng.next();
        for (const ImageTensor& adv :
             {attack::fgsm(m, x, y, cfg.epsilon), attack::fgm(m, x, y, cfg.epsilon), attack::pgd(m, x, y, cfg)}) {
            ++outputs;
            const double d = max_abs_diff(adv, x);
            worst = std::max(worst, d - cfg.epsilon);
            bool in_range = true;
            for (double v : adv.tensor().values()) in_range = in_range && v >= 0.0 && v <= 1.0;
            if (d > cfg.epsilon + 1e-6 || !in_range) ++violations;
        }
    }
    return {violations == 0,
            fmt("200 triples, %zu attack outputs, %zu violations (max excess over eps %.3g)", outputs, violations, worst)};
}

// --- 3: PGD analytic oracle --------------------------------------------------

Outcome pgd_oracle() {
    // L(x') = -(x' - x - eps)^2, maximised over the ball by grid search at
    // resolution 1e-4 (endpoints included), from several starting points.
    const double eps = 8.0 / 255;
    attack::AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.step_size = eps / 4;
    cfg.num_steps = 10;
    double worst = 0.0;
    for (double x0 : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double peak = x0 + eps;
        const Tensor x({1}, x0);
        auto grad = [&](const Tensor& xa) { return Tensor({1}, -2.0 * (xa[0] - peak)); };
        const double reached = attack::pgd_ascent(x, grad, cfg, true)[0];
        const auto n = static_cast<int>(std::ceil(2.0 * eps / 1e-4));
        double best = x0 - eps, best_value = -1e300;
        for (int k = 0; k <= n; ++k) {
            const double c = std::min(x0 - eps + k * 1e-4, x0 + eps);
            const double v = -(c - peak) * (c - peak);
            if (v > best_value) best_value = v, best = c;
        }
        worst = std::max({worst, std::abs(reached - best), std::abs(reached - peak)});
    }

    // T = 1 with alpha = eps and no random start against FGSM.
    const auto m = model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kPixel, 1, 16, 16}, 3);
    const ImageTensor x = robustdet::testing::random_images(8, 1, 16, 16, 4, 0.1, 0.9);
    const LabelVector y = robustdet::testing::alternating_labels(8);
    attack::AttackConfig one;
    one.epsilon = eps;
    one.step_size = eps;
    one.num_steps = 1;
    const bool bitwise = attack::pgd(m, x, y, one) == attack::fgsm(m, x, y, eps);
    return {worst <= 1e-6 && bitwise,
            fmt("max |PGD - grid optimum| %.3g from 5 starting points; PGD(T=1) == FGSM bitwise: %s", worst,
                bitwise ? "yes" : "no")};
}

// --- 4: gradient correctness -------------------------------------------------

double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

Outcome gradient_correctness() {
    double worst_input = 0.0, worst_param = 0.0;
    std::size_t checked = 0;
    for (auto arch : {model::Architecture::kSmallConv, model::Architecture::kSmallAttention}) {
        const auto m = model::DetectorModel::create({arch, model::InputSpace::kPixel, 1, 16, 16}, 7);
        const ImageTensor x = robustdet::testing::random_images(4, 1, 16, 16, 8, 0.05, 0.95);
        const LabelVector y{0, 1, 1, 0};
        Rng rng(9);

        const Tensor g = m.input_gradient(x, y);
        for (int k = 0; k < 20; ++k) {
            const std::size_t i = rng.below(x.tensor().size());
            Tensor plus = x.tensor(), minus = x.tensor();
            plus[i] += 1e-5;
            minus[i] -= 1e-5;
            const double numeric = (m.loss(plus, y) - m.loss(minus, y)) / 2e-5;
            worst_input = std::max(worst_input, rel_error(g[i], numeric));
            ++checked;
        }

        attack::AttackConfig atk;
        atk.random_init = true;
        const ImageTensor adv = attack::pgd(m, x, y, atk);
        const double lambda = 0.8;
        std::vector<double> grad(m.parameter_count(), 0.0);
        m.accumulate_gradient(x, y, 1.0, grad);
        m.accumulate_gradient(adv, y, lambda, grad);
        auto objective = [&](const model::DetectorModel& mm) {
            return advtrain::combined_loss(mm.loss(x, y), mm.loss(adv, y), lambda);
        };
        for (int k = 0; k < 20; ++k) {
            const std::size_t p = rng.below(m.parameter_count());
            auto plus = m, minus = m;
            plus.parameters()[p] += 1e-5;
            minus.parameters()[p] -= 1e-5;
            const double numeric = (objective(plus) - objective(minus)) / 2e-5;
            worst_param = std::max(worst_param, rel_error(grad[p], numeric));
            ++checked;
        }
    }
    return {worst_input <= 1e-3 && worst_param <= 1e-3,
            fmt("%zu coordinates on small-conv and small-attention; max rel error input %.2e, combined-loss params %.2e",
                checked, worst_input, worst_param)};
}

// --- 5: DDIM round trip ------------------------------------------------------

Outcome ddim_round_trip() {
    const auto schedule = diffusion::DiffusionSchedule::linear(20);
    const diffusion::ZeroPredictor zero;
    double worst_rt = 0.0, worst_dire = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        const ImageTensor x = robustdet::testing::random_images(1, 3, 16, 16, 500 + i);
        const Tensor rec = diffusion::reconstruct(diffusion::invert(x, schedule, zero), schedule, zero);
        worst_rt = std::max(worst_rt, max_abs_diff(rec, x));
        worst_dire = std::max(worst_dire, diffusion::dire(x, schedule, zero).max());
    }

    // Constant predictor against the update recurrence in long double, with
    // the alpha-bar sequence rebuilt from the beta schedule.
    std::vector<long double> ab{1.0L};
    {
        long double prod = 1.0L;
        std::vector<long double> train(1000);
        for (int i = 0; i < 1000; ++i) {
            prod *= 1.0L - (1e-4L + (0.02L - 1e-4L) * i / 999.0L);
            train[i] = prod;
        }
        for (int k = 1; k <= 20; ++k) ab.push_back(train[k * 50 - 1]);
    }
    const double c = 0.7;
    const diffusion::ConstantPredictor constant(c);
    const ImageTensor x = robustdet::testing::random_images(2, 1, 8, 8, 77);
    double worst_traj = 0.0;
    std::vector<long double> ref(x.tensor().values().begin(), x.tensor().values().end());
    diffusion::DiffusionState state{x.tensor(), 0};
    for (std::size_t t = 0; t < 20; ++t) {
        state = diffusion::ddim_inversion_step(state, schedule, constant);
        const long double a = ab[t], an = ab[t + 1];
        for (std::size_t i = 0; i < ref.size(); ++i) {
            ref[i] = std::sqrt(an) * (ref[i] / std::sqrt(a) + (std::sqrt((1 - an) / an) - std::sqrt((1 - a) / a)) * c);
            worst_traj = std::max(worst_traj, static_cast<double>(std::abs(ref[i] - state.x[i])));
        }
    }
    for (std::size_t t = 20; t > 0; --t) {
        state = diffusion::ddim_reconstruction_step(state, schedule, constant);
        const long double a = ab[t], ap = ab[t - 1];
        for (std::size_t i = 0; i < ref.size(); ++i) {
            ref[i] = std::sqrt(ap) * ((ref[i] - std::sqrt(1 - a) * c) / std::sqrt(a)) + std::sqrt(1 - ap) * c;
            worst_traj = std::max(worst_traj, static_cast<double>(std::abs(ref[i] - state.x[i])));
        }
    }
    const bool pass = worst_rt <= 1e-5 && worst_dire <= 1e-12 && worst_traj <= 1e-8;
    return {pass, fmt("50 images: max |R(I(x)) - x| %.2e, max DIRE %.2e; constant-predictor trajectory max deviation %.2e",
                      worst_rt, worst_dire, worst_traj)};
}

// --- shared desk benchmark for 6-9 -------------------------------------------

constexpr std::size_t kEpochs = 20;
constexpr std::uint64_t kSeeds[] = {0, 1, 2};

struct SeedRun {
    std::uint64_t seed = 0;
    SyntheticBenchmark bench;
    LabeledImages train, test;
    std::shared_ptr<diffusion::DireExtractor> extractor;
    std::optional<eval::EvalCell> standard, adversarial, dire_adversarial;
    double standard_seconds = 0, adversarial_seconds = 0, dire_seconds = 0;
};

std::map<std::uint64_t, SeedRun>& runs() {
    static std::map<std::uint64_t, SeedRun> r;
    return r;
}

SeedRun& run_for(std::uint64_t seed) {
    auto& all = runs();
    if (auto it = all.find(seed); it != all.end()) return it->second;
    SeedRun r;
    r.seed = seed;
    SyntheticParams p;
    p.measure_separability = false;
    r.bench = make_synthetic_benchmark(seed, p);
    r.train = load_train(r.bench);
    r.test = load_test(r.bench);
    r.extractor = std::make_shared<diffusion::DireExtractor>(r.bench.schedule, r.bench.predictor);
    return all.emplace(seed, std::move(r)).first->second;
}

advtrain::TrainConfig train_config(std::uint64_t seed) {
    advtrain::TrainConfig tc;
    tc.epochs = kEpochs;
    tc.seed = seed;
    return tc;
}

attack::AttackConfig training_attack() {
    attack::AttackConfig a;
    a.random_init = true;
    return a;
}

const eval::EvalCell& standard_cell(SeedRun& r) {
    if (!r.standard) {
        const auto t0 = std::chrono::steady_clock::now();
        auto m = model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kPixel, 1, 16, 16}, r.seed);
        advtrain::train_standard(m, r.train, train_config(r.seed));
        r.standard = eval::evaluate_cell({"pixel-conv", eval::Setting::kWithoutAT, &m}, r.test, {});
        r.standard_seconds = seconds_since(t0);
    }
    return *r.standard;
}

const eval::EvalCell& adversarial_cell(SeedRun& r) {
    if (!r.adversarial) {
        const auto t0 = std::chrono::steady_clock::now();
        auto m = model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kPixel, 1, 16, 16}, r.seed);
        advtrain::train_adversarial(m, r.train, train_config(r.seed), training_attack());
        r.adversarial = eval::evaluate_cell({"pixel-conv", eval::Setting::kWithAT, &m}, r.test, {});
        r.adversarial_seconds = seconds_since(t0);
    }
    return *r.adversarial;
}

const eval::EvalCell& dire_adversarial_cell(SeedRun& r) {
    if (!r.dire_adversarial) {
        const auto t0 = std::chrono::steady_clock::now();
        auto m = model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kDire, 1, 16, 16}, r.seed);
        diffusion::DireCache cache;
        advtrain::DireTrainingContext ctx;
        ctx.extractor = r.extractor.get();
        ctx.cache = &cache;
        advtrain::train_adversarial_dire(m, r.train, train_config(r.seed), training_attack(), ctx);
        r.dire_adversarial = eval::evaluate_cell({"dire", eval::Setting::kWithAT, &m, r.extractor.get()}, r.test, {});
        r.dire_seconds = seconds_since(t0);
    }
    return *r.dire_adversarial;
}

LabeledImages by_label(const LabeledImages& d, int label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.labels[i] == label) idx.push_back(i);
    return d.subset(idx);
}

// --- 6: DIRE separation ------------------------------------------------------

Outcome dire_separation() {
    SeedRun& r = run_for(0);
    const LabeledImages real = by_label(r.test, 0), fake = by_label(r.test, 1);
    const double dr = r.extractor->dire(real.images).mean();
    const double df = r.extractor->dire(fake.images).mean();
    const double margin = (dr - df) / dr;
    return {margin >= 0.2 && real.size() >= 200 && fake.size() >= 200,
            fmt("mean DIRE real %.4f vs generated %.4f over %zu/%zu images: generated lower by %.1f%%", dr, df,
                real.size(), fake.size(), 100 * margin)};
}

// --- 7: attack collapse ------------------------------------------------------

Outcome attack_collapse() {
    SeedRun& r = run_for(0);
    const auto& c = standard_cell(r);
    return {c.acc_clean >= 0.95 && c.acc_adv <= 0.10 && r.standard_seconds < 15 * 60,
            fmt("seed 0, %zu epochs: clean %.2f%%, adversarial %.2f%% (train+eval %.0f s)", kEpochs, 100 * c.acc_clean,
                100 * c.acc_adv, r.standard_seconds)};
}

// --- 8: adversarial-training recovery ----------------------------------------

Outcome at_recovery() {
    double adv = 0, score = 0, secs = 0;
    std::string per_seed;
    for (std::uint64_t s : kSeeds) {
        SeedRun& r = run_for(s);
        const auto& c = adversarial_cell(r);
        adv += c.acc_adv / 3;
        score += c.robustness_score.value_or(0.0) / 3;
        secs += r.adversarial_seconds;
        per_seed += fmt(" [seed %llu: clean %.2f%% adv %.2f%%]", static_cast<unsigned long long>(s), 100 * c.acc_clean,
                        100 * c.acc_adv);
    }
    return {adv >= 0.7 && score >= 0.7 && secs < 45 * 60,
            fmt("%zu epochs, mean adversarial %.2f%%, mean score %.3f (%.0f s)%s", kEpochs, 100 * adv, score, secs,
                per_seed.c_str())};
}

// --- 9: DIRE+AT dominance ----------------------------------------------------

Outcome dire_at_dominance() {
    int wins = 0;
    double secs = 0;
    std::string per_seed;
    for (std::uint64_t s : kSeeds) {
        SeedRun& r = run_for(s);
        const auto& plain = adversarial_cell(r);
        const auto& dire = dire_adversarial_cell(r);
        secs += r.dire_seconds;
        if (dire.acc_adv >= plain.acc_adv) ++wins;
        per_seed += fmt(" [seed %llu: DIRE+AT %.2f%% vs AT %.2f%%]", static_cast<unsigned long long>(s),
                        100 * dire.acc_adv, 100 * plain.acc_adv);
    }
    return {wins >= 2 && secs < 90 * 60,
            fmt("DIRE+AT >= AT in %d/3 seeds (DIRE+AT train+eval %.0f s)%s", wins, secs, per_seed.c_str())};
}

// --- 10: cross-domain bookkeeping --------------------------------------------

Outcome cross_domain() {
    SyntheticParams p = robustdet::testing::tiny_params(120, 60);
    const auto backbone = fit_benchmark_backbone(10, p);
    const SyntheticBenchmark a = make_synthetic_domain(10, p, "a", backbone);
    p.fingerprint = Fingerprint::kStripes;
    const SyntheticBenchmark b = make_synthetic_domain(11, p, "b", backbone);
    const diffusion::DireExtractor ex(a.schedule, backbone);

    advtrain::TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 10;
    const LabeledImages train = load_train(a);
    const model::DetectorSpec pixel{model::Architecture::kSmallConv, model::InputSpace::kPixel, 1, 16, 16};
    model::DetectorSpec dire_spec = pixel;
    dire_spec.input_space = model::InputSpace::kDire;
    auto m_std = model::DetectorModel::create(pixel, 1);
    auto m_at = model::DetectorModel::create(pixel, 2);
    auto m_dire = model::DetectorModel::create(dire_spec, 3);
    advtrain::DireTrainingContext ctx;
    ctx.extractor = &ex;
    const auto r_std = advtrain::train_standard(m_std, train, tc);
    const auto r_at = advtrain::train_adversarial(m_at, train, tc, training_attack());
    const auto r_dire = advtrain::train_standard_dire(m_dire, train, tc, ctx);

    const std::vector<DatasetSpec> tests{a.real_test, a.fake_test, b.real_test, b.fake_test};
    const std::set<std::string> held_out{b.real_test.name, b.fake_test.name};
    std::set<std::string> held_out_items;
    for (const auto& d : {b.real_test, b.fake_test, b.real_train, b.fake_train})
        for (const auto& id : item_ids(d)) held_out_items.insert(id);

    // Manifest assertion: no training batch drew from a held-out dataset.
    bool manifests_clean = true;
    for (const auto* rep : {&r_std, &r_at, &r_dire}) {
        for (const auto& d : rep->datasets_seen) manifests_clean = manifests_clean && !held_out.contains(d);
        for (const auto& id : rep->items_seen) manifests_clean = manifests_clean && !held_out_items.contains(id);
    }

    eval::ProtocolConfig pc;
    pc.protocol = eval::Protocol::kCrossDomain;
    pc.training_datasets = {a.real_train.name, a.fake_train.name};
    pc.attack.epsilon = 0.0;
    pc.attack.step_size = 0.0;
    const std::vector<eval::EvaluatedModel> models{
        {"pixel-conv", eval::Setting::kWithoutAT, &m_std, nullptr, nullptr, {r_std.datasets_seen, r_std.items_seen}},
        {"pixel-conv", eval::Setting::kWithAT, &m_at, nullptr, nullptr, {r_at.datasets_seen, r_at.items_seen}},
        {"dire", eval::Setting::kWithoutAT, &m_dire, &ex, nullptr, {r_dire.datasets_seen, r_dire.items_seen}},
    };
    const eval::EvalReport report = eval::evaluate_protocol(models, tests, pc);
    std::size_t equal = 0;
    for (const auto& [key, cell] : report.cells) equal += cell.acc_adv == cell.acc_clean ? 1 : 0;
    const bool held_out_recorded = std::set<std::string>(report.held_out_datasets.begin(),
                                                         report.held_out_datasets.end()) == held_out;

    // A manifest that claims a held-out dataset must be rejected.
    bool leak_rejected = false;
    try {
        auto leaked = models;
        leaked.resize(1);
        leaked[0].training.datasets.insert(b.fake_test.name);
        eval::evaluate_protocol(leaked, tests, pc);
    } catch (const ProtocolError&) {
        leak_rejected = true;
    }

    const bool pass = manifests_clean && held_out_recorded && leak_rejected && equal == report.cells.size();
    return {pass, fmt("manifests exclude held-out data: %s; leaked manifest rejected: %s; eps=0 acc_adv == acc_clean in "
                      "%zu/%zu cells",
                      manifests_clean ? "yes" : "no", leak_rejected ? "yes" : "no", equal, report.cells.size())};
}

// --- 11: determinism ---------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    robustdet::testing::TempDir dir("acceptance-determinism");
    const fs::path root = dir.path();
    using cli::Command;
    auto cfg = [&](Command c, std::vector<std::pair<std::string, std::string>> extra, const std::string& file = "") {
        std::vector<std::pair<std::string, std::string>> o{{"dataset.root", (root / "data").string()},
                                                           {"train_per_class", "60"},
                                                           {"test_per_class", "30"},
                                                           {"training.epochs", "3"},
                                                           {"seed", "5"}};
        o.insert(o.end(), extra.begin(), extra.end());
        return cli::parse_config_text(c, file, o);
    };
    if (cli::run_command(cfg(Command::kGenData, {{"output_dir", (root / "gen").string()}})).exit_code != 0) {
        return {false, "gen-data did not complete"};
    }
    std::size_t compared = 0, identical = 0;
    auto compare = [&](const fs::path& x, const fs::path& y) {
        ++compared;
        const std::string a = slurp(x);
        if (!a.empty() && a == slurp(y)) ++identical;
    };
    for (const char* mode : {"standard", "at"}) {
        for (const char* run : {"1", "2"}) {
            const auto r = cli::run_command(cfg(Command::kTrain, {{"output_dir", (root / (std::string(mode) + run)).string()},
                                                                  {"training.mode", mode},
                                                                  {"dataset.train", "a-real,a-fake"}}));
            if (r.exit_code != 0) return {false, "train " + std::string(mode) + " did not complete: " + r.error};
        }
        for (const char* f : {"detector.ckpt", "train_report.csv", "training_manifest.json"}) {
            compare(root / (std::string(mode) + "1") / f, root / (std::string(mode) + "2") / f);
        }
    }
    const std::string models = R"({"evaluation": {"models": {"pixel-conv": {"wo_at": ")" +
                               (root / "standard1" / "detector.ckpt").string() + R"(", "w_at": ")" +
                               (root / "at1" / "detector.ckpt").string() + R"("}}}})";
    for (const char* run : {"eval1", "eval2"}) {
        const auto r = cli::run_command(cfg(Command::kEval, {{"output_dir", (root / run).string()}}, models));
        if (r.exit_code != 0) return {false, "eval did not complete: " + r.error};
    }
    for (const char* f : {"report.csv", "report.json", "report.md"}) compare(root / "eval1" / f, root / "eval2" / f);
    return {identical == compared,
            fmt("%zu/%zu checkpoint, training-log and report files byte-identical across two train and eval runs",
                identical, compared)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "metric arithmetic", metric_arithmetic},
        {2, "eps-ball containment", ball_containment},
        {3, "PGD analytic oracle", pgd_oracle},
        {4, "gradient correctness", gradient_correctness},
        {5, "DDIM round trip", ddim_round_trip},
        {6, "DIRE separation trend", dire_separation},
        {7, "attack-collapse trend", attack_collapse},
        {8, "adversarial-training recovery trend", at_recovery},
        {9, "DIRE+AT dominance trend", dire_at_dominance},
        {10, "cross-domain bookkeeping", cross_domain},
        {11, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s  criterion %2d  %-36s %s  (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
