#include "robustdet/attack/attack.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"

#include <algorithm>
#include <cmath>

namespace robustdet::attack {

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("attack.epsilon", "must be in [0, 1)");
    if (!(step_size >= 0.0 && std::isfinite(step_size))) throw ConfigError("attack.alpha", "must be >= 0");
    if (num_steps < 1) throw ConfigError("attack.steps", "must be >= 1");
}

Perturbation project_box(const Perturbation& delta, double lo, double hi) {
    if (lo > hi) throw ContractError("project_box: lower bound exceeds upper bound");
    Perturbation out = delta;
    for (double& v : out.delta.values()) v = std::clamp(v, lo, hi);
    return out;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Tensor pgd_ascent(const Tensor& x, const GradientFn& gradient, const AttackConfig& cfg, bool clip_pixels) {
    cfg.validate();
    const double eps = cfg.epsilon;
    Tensor adv = x;
    if (cfg.random_init && eps > 0.0) {
        Rng rng(cfg.seed);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            adv[i] = x[i] + rng.uniform(-eps, eps);
            if (clip_pixels) adv[i] = std::clamp(adv[i], 0.0, 1.0);
        }
    }
    for (std::size_t step = 0; step < cfg.num_steps; ++step) {
        const Tensor g = gradient(adv);
        require_same_shape(g, adv, "pgd gradient");
        for (std::size_t i = 0; i < adv.size(); ++i) {
            double v = adv[i] + cfg.step_size * sign(g[i]);
            v = std::clamp(v, x[i] - eps, x[i] + eps);
            if (clip_pixels) v = std::clamp(v, 0.0, 1.0);
            adv[i] = v;
        }
    }
    return adv;
}

ImageTensor apply_step(const ImageTensor& x, const Tensor& direction, double epsilon) {
    require_same_shape(x.tensor(), direction, "attack step");
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i] + epsilon * direction[i], 0.0, 1.0);
    return ImageTensor(std::move(out));
}

ImageTensor fgsm(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y, double epsilon) {
    if (!(epsilon >= 0.0)) throw ContractError("fgsm: epsilon must be >= 0");
    Tensor g = model.input_gradient(x, y);
    for (double& v : g.values()) v = sign(v);
    return apply_step(x, g, epsilon);
}

ImageTensor fgm(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y, double epsilon) {
    if (!(epsilon >= 0.0)) throw ContractError("fgm: epsilon must be >= 0");
    // The step is normalised per sample so each image gets an ε-length move.
    Tensor g = model.input_gradient(x, y);
    for (std::size_t n = 0; n < g.batch(); ++n) {
        auto s = g.sample(n);
        double norm = 0.0;
        for (double v : s) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : s) v = norm > 0.0 ? v / norm : 0.0;
    }
    return apply_step(x, g, epsilon);
}

ImageTensor pgd(const model::DetectorModel& model, const ImageTensor& x, const LabelVector& y,
                const AttackConfig& cfg) {
    const auto grad = [&](const Tensor& adv) { return model.input_gradient(adv, y); };
    return ImageTensor::clamped(pgd_ascent(x.tensor(), grad, cfg, true));
}

ImageTensor random_noise(const ImageTensor& x, double epsilon, std::uint64_t seed) {
    Rng rng(seed);
    Tensor out = x.tensor();
    for (double& v : out.values()) v = std::clamp(v + rng.uniform(-epsilon, epsilon), 0.0, 1.0);
    return ImageTensor(std::move(out));
}

}  // namespace robustdet::attack
