#include "robustdet/attack/attack.hpp"
#include "robustdet/attack/dire_attack.hpp"
#include "robustdet/core/error.hpp"
#include "robustdet/diffusion/predictor.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace robustdet;
using namespace robustdet::attack;
using robustdet::testing::random_images;

namespace {

model::DetectorModel conv_model(std::uint64_t seed) {
    return model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kPixel, 1, 16, 16}, seed);
}

model::DetectorModel constant_model() {
    auto m = conv_model(0);
    m.zero_output_layer();
    return m;
}

AttackConfig pgd_cfg(double eps, std::size_t steps = 10, bool random_init = false, std::uint64_t seed = 0) {
    AttackConfig c;
    c.epsilon = eps;
    c.step_size = eps / 4;
    c.num_steps = steps;
    c.random_init = random_init;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(ProjectBox, ClampsElementwise) {
    const Perturbation d{Tensor({3}, std::vector<double>{-0.2, 0.0, 0.2})};
    EXPECT_EQ(project_box(d, -0.1, 0.1).delta.storage(), (std::vector<double>{-0.1, 0.0, 0.1}));
    EXPECT_EQ(project_box({Tensor({1}, 0.30)}, -0.1, 0.1).delta[0], 0.1);
    EXPECT_EQ(project_box({Tensor({1}, -0.05)}, -0.1, 0.1).delta[0], -0.05);
    EXPECT_THROW(project_box(d, 0.1, -0.1), ContractError);
}

TEST(ProjectBox, Idempotent) {
    Rng rng(1);
    Tensor t({50});
    for (double& v : t.storage()) v = rng.uniform(-1, 1);
    const Perturbation once = project_box({t}, -0.3, 0.2);
    EXPECT_EQ(project_box(once, -0.3, 0.2).delta, once.delta);
    EXPECT_LE(once.linf(), 0.3);
}

TEST(Sign, ZeroMapsToZero) {
    EXPECT_EQ(sign(0.0), 0.0);
    EXPECT_EQ(sign(-0.0), 0.0);
    EXPECT_EQ(sign(1e-300), 1.0);
    EXPECT_EQ(sign(-3.0), -1.0);
}

TEST(AttackConfig, Validation) {
    EXPECT_NO_THROW(pgd_cfg(8.0 / 255).validate());
    EXPECT_THROW(pgd_cfg(-0.1).validate(), ConfigError);
    EXPECT_THROW(pgd_cfg(1.0).validate(), ConfigError);
    EXPECT_THROW(pgd_cfg(0.1, 0).validate(), ConfigError);
    AttackConfig big = pgd_cfg(0.01);
    big.step_size = 0.02;
    EXPECT_TRUE(big.step_exceeds_epsilon());
    EXPECT_DOUBLE_EQ(AttackConfig{}.epsilon, 8.0 / 255);
    EXPECT_DOUBLE_EQ(AttackConfig{}.step_size, 2.0 / 255);
    EXPECT_EQ(AttackConfig{}.num_steps, 10u);
}

TEST(Fgsm, ConstantModelLeavesInputUnchanged) {
    const ImageTensor x = random_images(3, 1, 16, 16, 1);
    EXPECT_EQ(fgsm(constant_model(), x, {0, 1, 0}, 8.0 / 255), x);
}

TEST(Fgsm, ZeroEpsilonIsIdentity) {
    const ImageTensor x = random_images(2, 1, 16, 16, 2);
    EXPECT_EQ(fgsm(conv_model(1), x, {0, 1}, 0.0), x);
}

TEST(Fgsm, LogisticModelMovesAgainstWeights) {
    std::vector<double> w(64);
    Rng rng(2);
    for (double& v : w) v = rng.uniform(-1, 1);
    w[7] = 0.0;
    const auto m = robustdet::testing::logistic_model(w, 0.0, 1, 8, 8);
    const ImageTensor x(1, 1, 8, 8, 0.5);
    const double eps = 0.03;
    const ImageTensor adv = fgsm(m, x, {1}, eps);
    for (std::size_t i = 0; i < 64; ++i) {
        const double d = adv.tensor()[i] - 0.5;
        if (w[i] == 0.0) {
            EXPECT_EQ(d, 0.0);
        } else {
            EXPECT_NEAR(d, w[i] > 0 ? -eps : eps, 1e-15);
        }
    }
}

TEST(Fgm, HandArithmetic) {
    // Gradient of the label-0 loss is sigmoid(z) w, so g ∝ (3, 4) on two pixels.
    std::vector<double> w(64, 0.0);
    w[0] = 3.0;
    w[1] = 4.0;
    const auto m = robustdet::testing::logistic_model(w, 0.0, 1, 8, 8);
    const ImageTensor x(1, 1, 8, 8, 0.5);
    const ImageTensor adv = fgm(m, x, {0}, 0.05);
    EXPECT_NEAR(adv.tensor()[0] - 0.5, 0.03, 1e-12);
    EXPECT_NEAR(adv.tensor()[1] - 0.5, 0.04, 1e-12);
    for (std::size_t i = 2; i < 64; ++i) EXPECT_EQ(adv.tensor()[i], 0.5);
}

TEST(Fgm, ZeroGradientAndL2Bound) {
    const ImageTensor x = random_images(2, 1, 16, 16, 3, 0.2, 0.8);
    EXPECT_EQ(fgm(constant_model(), x, {0, 1}, 0.1), x);
    const ImageTensor adv = fgm(conv_model(4), x, {0, 1}, 0.1);
    for (std::size_t n = 0; n < 2; ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < 256; ++i) {
            const double d = adv.tensor().sample(n)[i] - x.tensor().sample(n)[i];
            s += d * d;
        }
        EXPECT_LE(std::sqrt(s), 0.1 + 1e-12);
    }
}

TEST(Pgd, DegenerateCases) {
    const ImageTensor x = random_images(2, 1, 16, 16, 5);
    EXPECT_EQ(pgd(conv_model(1), x, {0, 1}, pgd_cfg(0.0, 7)), x);
    EXPECT_EQ(pgd(constant_model(), x, {0, 1}, pgd_cfg(8.0 / 255)), x);
}

TEST(Pgd, ConcaveOneDimensionalOracle) {
    // L(x') = -(x' - x - eps)^2 is maximised on the ball at x + eps.
    const double x0 = 0.4, eps = 8.0 / 255;
    const Tensor x({1}, x0);
    auto grad = [&](const Tensor& xa) { return Tensor({1}, -2.0 * (xa[0] - x0 - eps)); };
    const Tensor adv = pgd_ascent(x, grad, pgd_cfg(eps), true);

    double best = x0 - eps, best_value = -1e300;
    const int n = static_cast<int>(std::ceil(2 * eps / 1e-4));
    for (int k = 0; k <= n; ++k) {
        const double c = x0 - eps + 2 * eps * k / n;
        const double v = -(c - x0 - eps) * (c - x0 - eps);
        if (v > best_value) best_value = v, best = c;
    }
    EXPECT_NEAR(adv[0], best, 1e-6);
    EXPECT_NEAR(adv[0], x0 + eps, 1e-6);
}

TEST(Pgd, SingleFullStepEqualsFgsmOnInteriorPoints) {
    const ImageTensor x = random_images(4, 1, 16, 16, 6, 0.1, 0.9);
    const LabelVector y{0, 1, 1, 0};
    const double eps = 8.0 / 255;
    AttackConfig one = pgd_cfg(eps, 1);
    one.step_size = eps;
    const auto m = conv_model(7);
    EXPECT_EQ(pgd(m, x, y, one), fgsm(m, x, y, eps));
}

TEST(Pgd, RandomStartIsSeededAndContained) {
    const ImageTensor x = random_images(3, 1, 16, 16, 8);
    const auto m = conv_model(9);
    const double eps = 8.0 / 255;
    const ImageTensor a = pgd(m, x, {0, 1, 0}, pgd_cfg(eps, 3, true, 42));
    EXPECT_EQ(a, pgd(m, x, {0, 1, 0}, pgd_cfg(eps, 3, true, 42)));
    EXPECT_NE(a, pgd(m, x, {0, 1, 0}, pgd_cfg(eps, 3, true, 43)));
    EXPECT_LE(max_abs_diff(a, x), eps + 1e-12);
}

TEST(Attacks, StayInsideBallAndPixelRange) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const double eps = rng.uniform(0.0, 0.1);
        const ImageTensor x = random_images(2, 1, 16, 16, rng.next());
        const auto m = conv_model(rng.next());
        const LabelVector y{static_cast<int>(rng.next() % 2), static_cast<int>(rng.next() % 2)};
        for (const ImageTensor& adv : {fgsm(m, x, y, eps), fgm(m, x, y, eps), pgd(m, x, y, pgd_cfg(eps, 5, true, trial))}) {
            EXPECT_LE(max_abs_diff(adv, x), eps + 1e-6);
            for (double v : adv.tensor().values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        }
    }
}

TEST(RandomNoise, BoundedAndSeeded) {
    const ImageTensor x = random_images(2, 1, 16, 16, 11);
    const ImageTensor a = random_noise(x, 0.05, 1);
    EXPECT_LE(max_abs_diff(a, x), 0.05 + 1e-12);
    EXPECT_EQ(a, random_noise(x, 0.05, 1));
}

TEST(DireAttack, GradModeNames) {
    EXPECT_EQ(parse_grad_mode("surrogate"), GradMode::kSurrogate);
    EXPECT_EQ(to_string(GradMode::kIdentityApproximation), "identity-approximation");
    EXPECT_THROW(parse_grad_mode("straight-through"), ConfigError);
}

namespace {

struct DirePipeline {
    std::shared_ptr<const diffusion::NoisePredictor> predictor;
    diffusion::DireExtractor extractor;
    model::DetectorModel detector;

    explicit DirePipeline(std::shared_ptr<const diffusion::NoisePredictor> p)
        : predictor(p),
          extractor(diffusion::DiffusionSchedule::linear(20), p),
          detector(model::DetectorModel::create({model::Architecture::kSmallConv, model::InputSpace::kDire, 1, 16, 16}, 5)) {}
};

}  // namespace

TEST(DireAttack, ZeroEpsilonIsIdentity) {
    DirePipeline p(std::make_shared<diffusion::GaussianPredictor>(diffusion::GaussianPredictor::untrained(1, 16, 16)));
    const ImageTensor x = random_images(2, 1, 16, 16, 12);
    for (GradMode mode : {GradMode::kIdentityApproximation, GradMode::kSurrogate}) {
        const auto surrogate = conv_model(3);
        EXPECT_EQ(pgd_through_dire(p.detector, x, {0, 1}, pgd_cfg(0.0), mode, p.extractor, &surrogate), x);
    }
}

TEST(DireAttack, ExactRoundTripMatchesPgdOnTheComposition) {
    // With eps_theta = 0 the pipeline is x -> f(min(1, s|x - x|)) = f(0):
    // a constant function, so PGD on the composition returns x.
    DirePipeline p(std::make_shared<diffusion::ZeroPredictor>());
    const ImageTensor x = random_images(3, 1, 16, 16, 13);
    const AttackConfig cfg = pgd_cfg(8.0 / 255);
    const ImageTensor adv = pgd_through_dire(p.detector, x, {0, 1, 1}, cfg, GradMode::kIdentityApproximation, p.extractor);
    auto composite_grad = [](const Tensor& xa) { return Tensor(xa.shape(), 0.0); };
    EXPECT_EQ(adv.tensor(), pgd_ascent(x.tensor(), composite_grad, cfg, true));
    EXPECT_EQ(adv, x);
}

TEST(DireAttack, SurrogateModeNeedsASurrogate) {
    DirePipeline p(std::make_shared<diffusion::ZeroPredictor>());
    const ImageTensor x = random_images(1, 1, 16, 16, 14);
    EXPECT_THROW(pgd_through_dire(p.detector, x, {1}, pgd_cfg(0.03), GradMode::kSurrogate, p.extractor), ConfigError);
}

TEST(DireAttack, RequiresADireDetector) {
    DirePipeline p(std::make_shared<diffusion::ZeroPredictor>());
    const ImageTensor x = random_images(1, 1, 16, 16, 15);
    EXPECT_THROW(pgd_through_dire(conv_model(1), x, {1}, pgd_cfg(0.03), GradMode::kIdentityApproximation, p.extractor),
                 ContractError);
}

TEST(DireAttack, SurrogateGradientDrivesTheSteps) {
    DirePipeline p(std::make_shared<diffusion::GaussianPredictor>(diffusion::GaussianPredictor::untrained(1, 16, 16)));
    const ImageTensor x = random_images(2, 1, 16, 16, 16, 0.2, 0.8);
    const auto surrogate = conv_model(17);
    const AttackConfig cfg = pgd_cfg(8.0 / 255);
    const ImageTensor via = pgd_through_dire(p.detector, x, {0, 1}, cfg, GradMode::kSurrogate, p.extractor, &surrogate);
    EXPECT_EQ(via, pgd(surrogate, x, {0, 1}, cfg));
}

TEST(DireAttack, IdentityApproximationGradientMatchesFrozenReconstruction) {
    DirePipeline p(std::make_shared<diffusion::GaussianPredictor>(diffusion::GaussianPredictor::untrained(1, 16, 16)));
    const ImageTensor x = random_images(1, 1, 16, 16, 18, 0.2, 0.8);
    const LabelVector y{1};
    const Tensor g = dire_input_gradient(p.detector, x, y, p.extractor);
    // Finite differences of f(min(1, s|x - r|)) with r = R(I(x)) held fixed.
    const Tensor r = p.extractor.round_trip(x);
    auto loss_at = [&](const Tensor& xa) {
        Tensor res(xa.shape());
        for (std::size_t i = 0; i < xa.size(); ++i) res[i] = xa[i] - r[i];
        return p.detector.loss(p.extractor.features_from_residual(res), y);
    };
    Rng rng(19);
    for (int k = 0; k < 10; ++k) {
        const std::size_t i = rng.next() % x.tensor().size();
        const double s = p.extractor.scale() * std::abs(x.tensor()[i] - r[i]);
        if (s > 0.99 || std::abs(x.tensor()[i] - r[i]) < 1e-5) continue;  // clamp and |r| kinks
        Tensor plus = x.tensor(), minus = x.tensor();
        plus[i] += 1e-6;
        minus[i] -= 1e-6;
        const double numeric = (loss_at(plus) - loss_at(minus)) / 2e-6;
        EXPECT_NEAR(g[i], numeric, 1e-3 * std::max(std::abs(numeric), 1e-6)) << i;
    }
}
