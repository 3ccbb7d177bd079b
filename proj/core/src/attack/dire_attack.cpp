#include "robustdet/attack/dire_attack.hpp"

#include "robustdet/core/error.hpp"

#include <cmath>

namespace robustdet::attack {

std::string_view to_string(GradMode mode) {
    return mode == GradMode::kSurrogate ? "surrogate" : "identity-approximation";
}

GradMode parse_grad_mode(std::string_view text) {
    if (text == "identity-approximation") return GradMode::kIdentityApproximation;
    if (text == "surrogate") return GradMode::kSurrogate;
    throw ConfigError("attack.grad_mode",
                      "expected identity-approximation|surrogate, got '" + std::string(text) + "'");
}

Tensor dire_input_gradient(const model::DetectorModel& model_on_dire, const Tensor& x, const LabelVector& y,
                           const diffusion::DireExtractor& extractor) {
    const Tensor rec = extractor.round_trip(x);
    Tensor residual(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) residual[i] = x[i] - rec[i];
    const ImageTensor features = extractor.features_from_residual(residual);
    Tensor g = model_on_dire.input_gradient(features, y);

    // features = min(1, s|r|) with r = x - R(I(x)) and R(I(x)) held fixed.
    const double s = extractor.scale();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = residual[i];
        const bool active = std::abs(r) > kResidualDeadZone && s * std::abs(r) < 1.0;
        g[i] = active ? g[i] * s * sign(r) : 0.0;
    }
    return g;
}

ImageTensor pgd_through_dire(const model::DetectorModel& model_on_dire, const ImageTensor& x, const LabelVector& y,
                             const AttackConfig& cfg, GradMode mode, const diffusion::DireExtractor& extractor,
                             const model::DetectorModel* surrogate) {
    if (model_on_dire.spec().input_space != model::InputSpace::kDire) {
        throw ContractError("pgd_through_dire: target model must consume DIRE features");
    }
    GradientFn grad;
    if (mode == GradMode::kIdentityApproximation) {
        grad = [&](const Tensor& adv) { return dire_input_gradient(model_on_dire, adv, y, extractor); };
    } else {
        if (!surrogate) throw ConfigError("attack.grad_mode", "surrogate mode needs a pixel-space surrogate detector");
        grad = [&](const Tensor& adv) { return surrogate->input_gradient(adv, y); };
    }
    return ImageTensor::clamped(pgd_ascent(x.tensor(), grad, cfg, true));
}

}  // namespace robustdet::attack
