#pragma once

#include "robustdet/attack/attack.hpp"
#include "robustdet/diffusion/dire.hpp"

namespace robustdet::attack {

/// How gradients cross the DDIM round trip when attacking x → DIRE(x) → f.
enum class GradMode {
    /// The reconstruction R(I(x)) is held fixed in the backward pass, so the
    /// residual x - R(I(x)) passes gradients to x unchanged.
    kIdentityApproximation,
    /// Gradients come from a separate pixel-space detector.
    kSurrogate,
};

std::string_view to_string(GradMode mode);
/// Throws ConfigError("attack.grad_mode") for an unknown name.
GradMode parse_grad_mode(std::string_view text);

/// Residuals smaller than this are treated as exact zeros when choosing the
/// subgradient of |·|; round-trip arithmetic leaves noise far below it.
inline constexpr double kResidualDeadZone = 1e-9;

/// PGD against the composite pipeline. The ε-ball and pixel range hold in
/// both modes. `surrogate` is required (and only used) in surrogate mode.
ImageTensor pgd_through_dire(const model::DetectorModel& model_on_dire, const ImageTensor& x, const LabelVector& y,
                             const AttackConfig& cfg, GradMode mode, const diffusion::DireExtractor& extractor,
                             const model::DetectorModel* surrogate = nullptr);

/// Gradient of the detector loss on DIRE features with respect to x under
/// the identity approximation.
Tensor dire_input_gradient(const model::DetectorModel& model_on_dire, const Tensor& x, const LabelVector& y,
                           const diffusion::DireExtractor& extractor);

}  // namespace robustdet::attack
