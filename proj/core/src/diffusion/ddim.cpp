#include "robustdet/diffusion/ddim.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"

#include <algorithm>
#include <cmath>

namespace robustdet::diffusion {

Tensor reconstruction_update(const Tensor& x_t, const Tensor& eps, double alpha_bar_t, double alpha_bar_prev) {
    require_same_shape(x_t, eps, "reconstruction_update");
    const double sa_t = std::sqrt(alpha_bar_t), s1_t = std::sqrt(1.0 - alpha_bar_t);
    const double sa_p = std::sqrt(alpha_bar_prev), s1_p = std::sqrt(1.0 - alpha_bar_prev);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sa_p * ((x_t[i] - s1_t * eps[i]) / sa_t) + s1_p * eps[i];
    }
    return out;
}

Tensor inversion_update(const Tensor& x_t, const Tensor& eps, double alpha_bar_t, double alpha_bar_next) {
    require_same_shape(x_t, eps, "inversion_update");
    const double sa_t = std::sqrt(alpha_bar_t), sa_n = std::sqrt(alpha_bar_next);
    const double coef = std::sqrt((1.0 - alpha_bar_next) / alpha_bar_next) - std::sqrt((1.0 - alpha_bar_t) / alpha_bar_t);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sa_n * (x_t[i] / sa_t + coef * eps[i]);
    return out;
}

DiffusionState ddim_reconstruction_step(const DiffusionState& state, const DiffusionSchedule& schedule,
                                        const NoisePredictor& predictor) {
    if (state.t == 0) throw DiffusionStepError("reconstruction step requested at t = 0");
    if (state.t > schedule.num_steps()) throw DiffusionStepError("state timestep beyond schedule length");
    const Tensor eps = predictor.predict(state.x, schedule.timestep(state.t));
    return {reconstruction_update(state.x, eps, schedule.alpha_bar(state.t), schedule.alpha_bar(state.t - 1)),
            state.t - 1};
}

DiffusionState ddim_inversion_step(const DiffusionState& state, const DiffusionSchedule& schedule,
                                   const NoisePredictor& predictor) {
    if (state.t >= schedule.num_steps()) throw DiffusionStepError("inversion step requested at t = T");
    const Tensor eps = predictor.predict(state.x, schedule.timestep(state.t));
    return {inversion_update(state.x, eps, schedule.alpha_bar(state.t), schedule.alpha_bar(state.t + 1)),
            state.t + 1};
}

DiffusionState invert(const Tensor& x0, const DiffusionSchedule& schedule, const NoisePredictor& predictor) {
    DiffusionState s{x0, 0};
    while (s.t < schedule.num_steps()) s = ddim_inversion_step(s, schedule, predictor);
    return s;
}

Tensor reconstruct(const DiffusionState& xT, const DiffusionSchedule& schedule, const NoisePredictor& predictor) {
    if (xT.t != schedule.num_steps()) throw ContractError("reconstruct: state is not at t = T");
    DiffusionState s = xT;
    while (s.t > 0) s = ddim_reconstruction_step(s, schedule, predictor);
    return std::move(s.x);
}

Tensor sample_images(std::size_t count, std::size_t channels, std::size_t height, std::size_t width,
                     const DiffusionSchedule& schedule, const NoisePredictor& predictor, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({count, channels, height, width});
    for (double& v : x.values()) v = rng.normal();
    x = reconstruct({std::move(x), schedule.num_steps()}, schedule, predictor);
    for (double& v : x.values()) v = std::clamp(v, 0.0, 1.0);
    return x;
}

}  // namespace robustdet::diffusion
