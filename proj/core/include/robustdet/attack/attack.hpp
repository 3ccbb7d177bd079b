#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/model/detector.hpp"

#include <cstdint>
#include <functional>

namespace robustdet::attack {

inline constexpr double kDefaultEpsilon = 8.0 / 255.0;

struct AttackConfig {
    double epsilon = kDefaultEpsilon;
    /// α, the per-step move in pixel units.
    double step_size = kDefaultEpsilon / 4.0;
    std::size_t num_steps = 10;
    bool random_init = false;
    /// Seed for the random start; unused when random_init is false.
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the key on an invalid value.
    void validate() const;
    /// True when α > ε, which is allowed but usually a mistake.
    bool step_exceeds_epsilon() const { return step_size > epsilon; }

    friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct Perturbation {
    Tensor delta;

    double linf() const { return max_abs(delta); }
};

/// Clamps every element of delta into [lo, hi]. Throws ContractError if lo > hi.
Perturbation project_box(const Perturbation& delta, double lo, double hi);

/// sign with sign(0) = 0.
double sign(double v);

/// Loss gradient with respect to the current adversarial iterate.
using GradientFn = std::function<Tensor(const Tensor& x_adv)>;

/// Signed-gradient ascent projected onto the L∞ ball around x:
/// x' ← clamp(clamp(x' + α sign(g), x - ε, x + ε), 0, 1).
/// Pixel clipping can be disabled for inputs that are not images.
Tensor pgd_ascent(const Tensor& x, const GradientFn& gradient, const AttackConfig& cfg, bool clip_pixels = true);

ImageTensor fgsm(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y, double epsilon);
ImageTensor fgm(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y, double epsilon);
ImageTensor pgd(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y,
                const AttackConfig& cfg);

/// x + ε·direction, clipped to [0, 1]. Shared by the single-step attacks.
ImageTensor apply_step(const ImageTensor& x, const Tensor& direction, double epsilon);

/// Uniform random perturbation in [-ε, ε] (clipped to [0, 1]); the
/// baseline an attack has to beat.
ImageTensor random_noise(const ImageTensor& x, double epsilon, std::uint64_t seed);

}  // namespace robustdet::attack
