#include "robustdet/model/network.hpp"

#include "robustdet/core/error.hpp"

namespace robustdet::model {

Network::Network(std::vector<std::shared_ptr<const Layer>> layers) : layers_(std::move(layers)) {
    for (const auto& layer : layers_) {
        offsets_.push_back(total_);
        total_ += layer->parameter_count();
    }
}

std::vector<ParameterBlock> Network::parameter_blocks() const {
    std::vector<ParameterBlock> blocks;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        std::size_t offset = offsets_[i];
        for (const auto& p : layers_[i]->parameter_shapes()) {
            blocks.push_back({std::to_string(i) + "." + layers_[i]->kind() + "." + p.name, p.dims, offset, p.size()});
            offset += p.size();
        }
    }
    return blocks;
}

void Network::initialize(std::span<double> params, Rng& rng) const {
    if (params.size() != total_) throw ContractError("network: parameter buffer has the wrong size");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->initialize(params.subspan(offsets_[i], layers_[i]->parameter_count()), rng);
    }
}

Tensor Network::forward(const Tensor& input, std::span<const double> params, std::vector<LayerCache>* caches) const {
    if (params.size() != total_) throw ContractError("network: parameter buffer has the wrong size");
    if (caches) caches->assign(layers_.size(), LayerCache{});
    Tensor x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i]->forward(x, params.subspan(offsets_[i], layers_[i]->parameter_count()),
                                caches ? &(*caches)[i] : nullptr);
    }
    return x;
}

Tensor Network::backward(const Tensor& grad_output, const std::vector<LayerCache>& caches,
                         std::span<const double> params, std::span<double> param_grad) const {
    if (caches.size() != layers_.size()) throw ContractError("network: backward called without a forward cache");
    if (!param_grad.empty() && param_grad.size() != total_) {
        throw ContractError("network: gradient buffer has the wrong size");
    }
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const std::size_t n = layers_[i]->parameter_count();
        g = layers_[i]->backward(g, caches[i], params.subspan(offsets_[i], n),
                                 param_grad.empty() ? std::span<double>() : param_grad.subspan(offsets_[i], n));
    }
    return g;
}

}  // namespace robustdet::model
