#pragma once

#include "robustdet/core/random.hpp"
#include "robustdet/core/tensor.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace robustdet::model {

/// Named parameter block inside a layer, e.g. {"weight", {8, 1, 3, 3}}.
struct ParameterShape {
    std::string name;
    std::vector<std::size_t> dims;

    std::size_t size() const;
};

/// Tensors a layer saves during forward for use in backward.
struct LayerCache {
    std::vector<Tensor> saved;
};

/// Stateless differentiable layer. Parameters live in the owning Network's
/// flat buffer and are passed in as a span; layers never own weights.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual std::vector<ParameterShape> parameter_shapes() const { return {}; }
    std::size_t parameter_count() const;
    virtual void initialize(std::span<double> params, Rng& rng) const;

    /// `cache` may be null when no backward pass will follow.
    virtual Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const = 0;

    /// Returns the gradient with respect to the input. Parameter gradients are
    /// accumulated into `param_grad` unless it is empty.
    virtual Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                            std::span<double> param_grad) const = 0;
};

/// y = (x - shift) * scale, elementwise.
class InputNormalize final : public Layer {
public:
    InputNormalize(double shift, double scale) : shift_(shift), scale_(scale) {}
    std::string kind() const override { return "input_normalize"; }
    Tensor forward(const Tensor& input, std::span<const double>, LayerCache*) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache&, std::span<const double>,
                    std::span<double>) const override;

private:
    double shift_;
    double scale_;
};

/// 2-D convolution on (N, C, H, W) with square kernels and zero padding.
class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t padding);
    std::string kind() const override { return "conv2d"; }
    std::vector<ParameterShape> parameter_shapes() const override;
    void initialize(std::span<double> params, Rng& rng) const override;
    Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                    std::span<double> param_grad) const override;

    std::size_t output_extent(std::size_t in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }

private:
    std::size_t in_channels_, out_channels_, kernel_, stride_, padding_;
};

class SiLU final : public Layer {
public:
    std::string kind() const override { return "silu"; }
    Tensor forward(const Tensor& input, std::span<const double>, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                    std::span<double>) const override;
};

/// (N, ...) -> (N, prod(...)).
class Flatten final : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Tensor forward(const Tensor& input, std::span<const double>, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                    std::span<double>) const override;
};

/// y = x W^T + b on (N, in) inputs.
class Linear final : public Layer {
public:
    Linear(std::size_t in_features, std::size_t out_features);
    std::string kind() const override { return "linear"; }
    std::vector<ParameterShape> parameter_shapes() const override;
    void initialize(std::span<double> params, Rng& rng) const override;
    Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                    std::span<double> param_grad) const override;

private:
    std::size_t in_, out_;
};

/// Splits (N, C, H, W) into non-overlapping patch tokens, projects each to
/// `dim` features and adds a learned position embedding: (N, L, dim).
class PatchEmbed final : public Layer {
public:
    PatchEmbed(std::size_t channels, std::size_t height, std::size_t width, std::size_t patch, std::size_t dim);
    std::string kind() const override { return "patch_embed"; }
    std::vector<ParameterShape> parameter_shapes() const override;
    void initialize(std::span<double> params, Rng& rng) const override;
    Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                    std::span<double> param_grad) const override;

    std::size_t tokens() const { return (height_ / patch_) * (width_ / patch_); }

private:
    std::size_t channels_, height_, width_, patch_, dim_;
};

/// Pre-norm transformer block on (N, L, dim): single-head self-attention
/// and a SiLU MLP, each wrapped in a residual connection.
class TransformerBlock final : public Layer {
public:
    TransformerBlock(std::size_t dim, std::size_t hidden);
    std::string kind() const override { return "transformer_block"; }
    std::vector<ParameterShape> parameter_shapes() const override;
    void initialize(std::span<double> params, Rng& rng) const override;
    Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                    std::span<double> param_grad) const override;

private:
    std::size_t dim_, hidden_;
};

/// Normalizes the last axis of (N, L, dim).
class LayerNorm final : public Layer {
public:
    explicit LayerNorm(std::size_t dim) : dim_(dim) {}
    std::string kind() const override { return "layer_norm"; }
    std::vector<ParameterShape> parameter_shapes() const override;
    void initialize(std::span<double> params, Rng& rng) const override;
    Tensor forward(const Tensor& input, std::span<const double> params, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double> params,
                    std::span<double> param_grad) const override;

private:
    std::size_t dim_;
};

/// (N, L, dim) -> (N, dim), averaging over tokens.
class TokenMeanPool final : public Layer {
public:
    std::string kind() const override { return "token_mean_pool"; }
    Tensor forward(const Tensor& input, std::span<const double>, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_output, const LayerCache& cache, std::span<const double>,
                    std::span<double>) const override;
};

}  // namespace robustdet::model
