#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/model/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robustdet::model {

enum class Architecture {
    kSmallConv,
    kSmallAttention,
    /// Flatten + affine map to two logits. Used as a reference model in tests.
    kLinear,
};

enum class InputSpace { kPixel, kDire };

std::string_view to_string(Architecture arch);
std::string_view to_string(InputSpace space);
Architecture parse_architecture(std::string_view text);
InputSpace parse_input_space(std::string_view text);

struct DetectorSpec {
    Architecture architecture = Architecture::kSmallConv;
    InputSpace input_space = InputSpace::kPixel;
    std::size_t channels = 1;
    std::size_t height = 16;
    std::size_t width = 16;

    friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

/// Two-class detector f. Logit 1 is the "synthetic" class; forward returns
/// its softmax probability.
class DetectorModel {
public:
    /// Builds the architecture and draws initial weights from `seed`.
    static DetectorModel create(const DetectorSpec& spec, std::uint64_t seed);
    /// Builds the architecture around existing parameters (e.g. a checkpoint).
    static DetectorModel from_parameters(const DetectorSpec& spec, std::vector<double> parameters);

    const DetectorSpec& spec() const noexcept { return spec_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::vector<ParameterBlock> parameter_blocks() const { return network_.parameter_blocks(); }

    /// (N, 2) logits. Throws ContractError if x does not match the DetectorSpec.
    Tensor logits(const Tensor& x) const;
    /// Per-sample probability of class 1.
    std::vector<double> forward(const Tensor& x) const;
    /// Label 1 iff probability > 0.5; an exact tie goes to 0.
    LabelVector predict(const Tensor& x) const;

    /// Mean cross-entropy over the batch, in nats.
    double loss(const Tensor& x, const LabelVector& y) const;
    std::vector<double> per_sample_loss(const Tensor& x, const LabelVector& y) const;

    /// Gradient of the mean loss with respect to x. Parameters are untouched.
    Tensor input_gradient(const Tensor& x, const LabelVector& y) const;

    /// Returns the mean loss and accumulates weight * dloss/dparameters into
    /// `param_grad`. If `input_grad` is non-null it receives dloss/dx.
    double accumulate_gradient(const Tensor& x, const LabelVector& y, double weight, std::span<double> param_grad,
                               Tensor* input_grad = nullptr) const;

    /// Zeroes the weights and bias of the output layer (equal logits).
    void zero_output_layer();

    /// FNV-1a hash of the raw parameter bytes.
    std::uint64_t parameter_hash() const;

private:
    DetectorModel(DetectorSpec spec, Network network, std::vector<double> params);
    void check_input(const Tensor& x) const;

    DetectorSpec spec_;
    Network network_;
    std::vector<double> params_;
};

Network build_network(const DetectorSpec& spec);

/// Mean binary cross-entropy of class-1 probabilities, clamped away from
/// 0 and 1 by 1e-12.
double binary_cross_entropy(std::span<const double> probabilities, const LabelVector& labels);

}  // namespace robustdet::model
