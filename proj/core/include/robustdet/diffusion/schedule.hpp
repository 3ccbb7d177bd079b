#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace robustdet::diffusion {

/// Noise level handed to a predictor at one DDIM state.
struct Timestep {
    /// State index 0..T.
    std::size_t index = 0;
    /// Step of the underlying training schedule the predictor is conditioned on.
    std::size_t train_step = 0;
    /// ᾱ of the DDIM state (1 at index 0).
    double alpha_bar = 1.0;
    /// ᾱ the predictor should assume for its input.
    double model_alpha_bar = 1.0;
};

/// Cumulative-product schedule ᾱ_1 > ᾱ_2 > ... > ᾱ_T with ᾱ_0 := 1.
/// Only the deterministic sampler is supported, so σ_t is identically 0.
class DiffusionSchedule {
public:
    /// Linear β from beta_start to beta_end over `train_steps`, subsampled
    /// to `num_steps` evenly spaced DDIM states.
    static DiffusionSchedule linear(std::size_t num_steps = 20, std::size_t train_steps = 1000,
                                    double beta_start = 1e-4, double beta_end = 0.02);

    /// Explicit ᾱ_1..ᾱ_T. Throws ContractError unless every value is in
    /// (0, 1] and the sequence is strictly decreasing. An empty sequence
    /// gives the degenerate T = 0 schedule.
    static DiffusionSchedule from_alpha_bar(std::vector<double> alpha_bar);

    std::size_t num_steps() const noexcept { return alpha_bar_.size() - 1; }
    /// ᾱ_t for t in 0..T.
    double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }
    double sigma(std::size_t) const noexcept { return 0.0; }
    Timestep timestep(std::size_t t) const;

    /// Stable identifier used in cache keys and checkpoint metadata.
    std::string id() const;

private:
    DiffusionSchedule(std::vector<double> alpha_bar, std::vector<std::size_t> train_steps,
                      std::vector<double> model_alpha_bar, std::string id);

    std::vector<double> alpha_bar_;
    std::vector<std::size_t> train_steps_;
    std::vector<double> model_alpha_bar_;
    std::string id_;
};

/// ᾱ of every step of a linear-β training schedule.
std::vector<double> linear_training_alpha_bar(std::size_t train_steps, double beta_start, double beta_end);

}  // namespace robustdet::diffusion
