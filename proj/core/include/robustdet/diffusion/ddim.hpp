#pragma once

#include "robustdet/diffusion/predictor.hpp"
#include "robustdet/diffusion/schedule.hpp"

#include <cstdint>

namespace robustdet::diffusion {

struct DiffusionState {
    Tensor x;
    std::size_t t = 0;
};

/// x_{t-1} = √ᾱ_{t-1} (x_t - √(1-ᾱ_t) ε) / √ᾱ_t + √(1-ᾱ_{t-1}) ε.
Tensor reconstruction_update(const Tensor& x_t, const Tensor& eps, double alpha_bar_t, double alpha_bar_prev);

/// x_{t+1} = √ᾱ_{t+1} (x_t / √ᾱ_t + (√((1-ᾱ_{t+1})/ᾱ_{t+1}) - √((1-ᾱ_t)/ᾱ_t)) ε).
Tensor inversion_update(const Tensor& x_t, const Tensor& eps, double alpha_bar_t, double alpha_bar_next);

/// One deterministic reverse step. Throws DiffusionStepError at t = 0.
DiffusionState ddim_reconstruction_step(const DiffusionState& state, const DiffusionSchedule& schedule,
                                        const NoisePredictor& predictor);

/// One inversion step. Throws DiffusionStepError at t = T.
DiffusionState ddim_inversion_step(const DiffusionState& state, const DiffusionSchedule& schedule,
                                   const NoisePredictor& predictor);

/// I(x_0): T inversion steps from t = 0.
DiffusionState invert(const Tensor& x0, const DiffusionSchedule& schedule, const NoisePredictor& predictor);

/// R(x_T): T reverse steps down to t = 0. Throws ContractError unless
/// xT.t equals the schedule length.
Tensor reconstruct(const DiffusionState& xT, const DiffusionSchedule& schedule, const NoisePredictor& predictor);

/// Draws x_T ~ N(0, I), runs the deterministic reverse process and clips
/// the result to [0, 1].
Tensor sample_images(std::size_t count, std::size_t channels, std::size_t height, std::size_t width,
                     const DiffusionSchedule& schedule, const NoisePredictor& predictor, std::uint64_t seed);

}  // namespace robustdet::diffusion
