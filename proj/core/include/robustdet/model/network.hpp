#pragma once

#include "robustdet/model/layers.hpp"

#include <memory>
#include <vector>

namespace robustdet::model {

/// One named parameter block of a network, located in the flat buffer.
struct ParameterBlock {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Sequential stack of layers sharing one flat parameter buffer.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<std::shared_ptr<const Layer>> layers);

    std::size_t parameter_count() const noexcept { return total_; }
    std::vector<ParameterBlock> parameter_blocks() const;
    std::size_t layer_count() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    /// Calls each layer's initializer on its slice of `params`.
    void initialize(std::span<double> params, Rng& rng) const;

    /// Runs every layer. When `caches` is non-null it is resized and filled
    /// for a subsequent backward call.
    Tensor forward(const Tensor& input, std::span<const double> params, std::vector<LayerCache>* caches) const;

    /// Backpropagates `grad_output`, returning the input gradient. Parameter
    /// gradients are accumulated into `param_grad` unless it is empty.
    Tensor backward(const Tensor& grad_output, const std::vector<LayerCache>& caches,
                    std::span<const double> params, std::span<double> param_grad) const;

private:
    std::vector<std::shared_ptr<const Layer>> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

}  // namespace robustdet::model
