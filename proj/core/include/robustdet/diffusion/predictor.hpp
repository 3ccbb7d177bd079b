#pragma once

#include "robustdet/core/container.hpp"
#include "robustdet/core/tensor.hpp"
#include "robustdet/diffusion/schedule.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace robustdet::diffusion {

/// ε_θ(x_t, t). Implementations are immutable and deterministic.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    /// Returns an array shaped like `x_t`.
    virtual Tensor predict(const Tensor& x_t, const Timestep& t) const = 0;
    /// Identifier used in cache keys; changes whenever the parameters do.
    virtual std::string id() const = 0;
};

/// ε_θ ≡ 0. DDIM inversion and reconstruction are then exact inverses.
class ZeroPredictor final : public NoisePredictor {
public:
    Tensor predict(const Tensor& x_t, const Timestep&) const override { return Tensor(x_t.shape(), 0.0); }
    std::string id() const override { return "zero"; }
};

/// ε_θ ≡ c.
class ConstantPredictor final : public NoisePredictor {
public:
    explicit ConstantPredictor(double value) : value_(value) {}
    Tensor predict(const Tensor& x_t, const Timestep&) const override { return Tensor(x_t.shape(), value_); }
    std::string id() const override;

private:
    double value_;
};

/// Bayes-optimal noise predictor for a Gaussian image prior N(μ, U diag(s²) Uᵀ).
///
/// With x_t = √ᾱ x_0 + √(1-ᾱ) ε, the posterior mean of ε in the eigenbasis is
/// z_i √(1-ᾱ) / (ᾱ s_i² + 1 - ᾱ) where z = Uᵀ(x_t - √ᾱ μ).
class GaussianPredictor final : public NoisePredictor {
public:
    /// Zero mean and identity covariance: the predictor before any fitting.
    static GaussianPredictor untrained(std::size_t channels, std::size_t height, std::size_t width);

    GaussianPredictor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> mean,
                      std::vector<double> basis, std::vector<double> variances);

    Tensor predict(const Tensor& x_t, const Timestep& t) const override;
    std::string id() const override { return id_; }

    std::size_t channels() const noexcept { return c_; }
    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t dimension() const noexcept { return c_ * h_ * w_; }
    const std::vector<double>& mean() const noexcept { return mean_; }
    /// Row-major D x D matrix whose columns are the eigenvectors.
    const std::vector<double>& basis() const noexcept { return basis_; }
    const std::vector<double>& variances() const noexcept { return variances_; }

    Container to_container() const;
    /// Throws IngestionError unless `c` holds a noise-predictor checkpoint.
    static GaussianPredictor from_container(const Container& c);

private:
    std::size_t c_, h_, w_;
    std::vector<double> mean_;
    std::vector<double> basis_;
    std::vector<double> variances_;
    std::string id_;
};

struct ToyDiffusionConfig {
    /// Lower bound on every eigenvalue; keeps the predictor well conditioned.
    double variance_floor = 1e-4;
};

/// Fits the Gaussian predictor to the first and second moments of `data`
/// ((N, C, H, W), N >= 1). Throws EmptyDatasetError for an empty batch.
GaussianPredictor train_toy_diffusion(const Tensor& data, const ToyDiffusionConfig& cfg = {});

/// Mean squared noise-prediction error E‖ε - ε_θ(√ᾱ x_0 + √(1-ᾱ) ε, t)‖² / D
/// over `draws` random (sample, step, noise) triples, using the schedule's
/// DDIM states 1..T.
double denoising_loss(const NoisePredictor& predictor, const Tensor& data, const DiffusionSchedule& schedule,
                      std::uint64_t seed, std::size_t draws = 4);

void save_predictor(const std::filesystem::path& path, const GaussianPredictor& predictor);
GaussianPredictor load_predictor(const std::filesystem::path& path);

}  // namespace robustdet::diffusion
