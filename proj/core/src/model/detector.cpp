#include "robustdet/model/detector.hpp"

#include "robustdet/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace robustdet::model {

std::string_view to_string(Architecture arch) {
    switch (arch) {
        case Architecture::kSmallConv: return "small-conv";
        case Architecture::kSmallAttention: return "small-attention";
        case Architecture::kLinear: return "linear";
    }
    return "unknown";
}

std::string_view to_string(InputSpace space) { return space == InputSpace::kDire ? "dire" : "pixel"; }

Architecture parse_architecture(std::string_view text) {
    if (text == "small-conv") return Architecture::kSmallConv;
    if (text == "small-attention") return Architecture::kSmallAttention;
    if (text == "linear") return Architecture::kLinear;
    throw ConfigError("architecture", "expected small-conv|small-attention|linear, got '" + std::string(text) + "'");
}

InputSpace parse_input_space(std::string_view text) {
    if (text == "pixel") return InputSpace::kPixel;
    if (text == "dire") return InputSpace::kDire;
    throw ConfigError("input_space", "expected pixel|dire, got '" + std::string(text) + "'");
}

Network build_network(const DetectorSpec& spec) {
    const std::size_t c = spec.channels, h = spec.height, w = spec.width;
    if (c == 0 || h == 0 || w == 0) throw ContractError("detector: input dimensions must be positive");
    std::vector<std::shared_ptr<const Layer>> layers;
    switch (spec.architecture) {
        case Architecture::kLinear:
            layers.push_back(std::make_shared<Flatten>());
            layers.push_back(std::make_shared<Linear>(c * h * w, 2));
            break;
        case Architecture::kSmallConv: {
            // Inputs are centred so the first layer does not start saturated.
            layers.push_back(std::make_shared<InputNormalize>(0.5, 4.0));
            auto c1 = std::make_shared<Conv2d>(c, 8, 3, 1, 1);
            auto c2 = std::make_shared<Conv2d>(8, 16, 3, 2, 1);
            auto c3 = std::make_shared<Conv2d>(16, 16, 3, 2, 1);
            const std::size_t oh = c3->output_extent(c2->output_extent(c1->output_extent(h)));
            const std::size_t ow = c3->output_extent(c2->output_extent(c1->output_extent(w)));
            layers.push_back(c1);
            layers.push_back(std::make_shared<SiLU>());
            layers.push_back(c2);
            layers.push_back(std::make_shared<SiLU>());
            layers.push_back(c3);
            layers.push_back(std::make_shared<SiLU>());
            layers.push_back(std::make_shared<Flatten>());
            layers.push_back(std::make_shared<Linear>(16 * oh * ow, 2));
            break;
        }
        case Architecture::kSmallAttention: {
            constexpr std::size_t kPatch = 4, kDim = 32, kHidden = 64;
            layers.push_back(std::make_shared<InputNormalize>(0.5, 4.0));
            layers.push_back(std::make_shared<PatchEmbed>(c, h, w, kPatch, kDim));
            layers.push_back(std::make_shared<TransformerBlock>(kDim, kHidden));
            layers.push_back(std::make_shared<TransformerBlock>(kDim, kHidden));
            layers.push_back(std::make_shared<LayerNorm>(kDim));
            layers.push_back(std::make_shared<TokenMeanPool>());
            layers.push_back(std::make_shared<Linear>(kDim, 2));
            break;
        }
    }
    return Network(std::move(layers));
}

DetectorModel::DetectorModel(DetectorSpec spec, Network network, std::vector<double> params)
    : spec_(spec), network_(std::move(network)), params_(std::move(params)) {}

DetectorModel DetectorModel::create(const DetectorSpec& spec, std::uint64_t seed) {
    Network net = build_network(spec);
    std::vector<double> params(net.parameter_count());
    Rng rng(seed);
    net.initialize(params, rng);
    return DetectorModel(spec, std::move(net), std::move(params));
}

DetectorModel DetectorModel::from_parameters(const DetectorSpec& spec, std::vector<double> parameters) {
    Network net = build_network(spec);
    if (parameters.size() != net.parameter_count()) {
        throw ContractError("detector: expected " + std::to_string(net.parameter_count()) + " parameters, got " +
                            std::to_string(parameters.size()));
    }
    return DetectorModel(spec, std::move(net), std::move(parameters));
}

void DetectorModel::check_input(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != spec_.channels || x.dim(2) != spec_.height || x.dim(3) != spec_.width) {
        throw ContractError("detector: input shape does not match model input (" + std::to_string(spec_.channels) +
                            ", " + std::to_string(spec_.height) + ", " + std::to_string(spec_.width) + ")");
    }
}

Tensor DetectorModel::logits(const Tensor& x) const {
    check_input(x);
    return network_.forward(x, params_, nullptr);
}

namespace {

double class1_probability(double l0, double l1) { return 1.0 / (1.0 + std::exp(l0 - l1)); }

// -log softmax(l)[y], computed stably.
double cross_entropy_from_logits(double l0, double l1, int y) {
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    return lse - (y == 1 ? l1 : l0);
}

void check_labels(const Tensor& x, const LabelVector& y) {
    if (y.size() != x.batch()) throw ContractError("labels and inputs have different batch sizes");
    validate_labels(y);
}

}  // namespace

std::vector<double> DetectorModel::forward(const Tensor& x) const {
    const Tensor z = logits(x);
    std::vector<double> p(z.batch());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = class1_probability(z[2 * i], z[2 * i + 1]);
    return p;
}

LabelVector DetectorModel::predict(const Tensor& x) const {
    const std::vector<double> p = forward(x);
    LabelVector out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.5 ? 1 : 0;
    return out;
}

std::vector<double> DetectorModel::per_sample_loss(const Tensor& x, const LabelVector& y) const {
    check_labels(x, y);
    const Tensor z = logits(x);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = cross_entropy_from_logits(z[2 * i], z[2 * i + 1], y[i]);
    return out;
}

double DetectorModel::loss(const Tensor& x, const LabelVector& y) const {
    const std::vector<double> l = per_sample_loss(x, y);
    double s = 0.0;
    for (double v : l) s += v;
    return s / static_cast<double>(l.size());
}

double DetectorModel::accumulate_gradient(const Tensor& x, const LabelVector& y, double weight,
                                          std::span<double> param_grad, Tensor* input_grad) const {
    check_input(x);
    check_labels(x, y);
    std::vector<LayerCache> caches;
    const Tensor z = network_.forward(x, params_, &caches);
    const std::size_t n = y.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor dz(z.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l0 = z[2 * i], l1 = z[2 * i + 1];
        total += cross_entropy_from_logits(l0, l1, y[i]);
        const double p1 = class1_probability(l0, l1);
        dz[2 * i] = ((1.0 - p1) - (y[i] == 0 ? 1.0 : 0.0)) * inv_n;
        dz[2 * i + 1] = (p1 - (y[i] == 1 ? 1.0 : 0.0)) * inv_n;
    }
    if (param_grad.empty() || weight == 1.0) {
        Tensor gx = network_.backward(dz, caches, params_, param_grad);
        if (input_grad) *input_grad = std::move(gx);
    } else {
        std::vector<double> local(params_.size(), 0.0);
        Tensor gx = network_.backward(dz, caches, params_, local);
        for (std::size_t k = 0; k < local.size(); ++k) param_grad[k] += weight * local[k];
        if (input_grad) *input_grad = std::move(gx);
    }
    return total * inv_n;
}

Tensor DetectorModel::input_gradient(const Tensor& x, const LabelVector& y) const {
    Tensor g;
    accumulate_gradient(x, y, 1.0, {}, &g);
    return g;
}

void DetectorModel::zero_output_layer() {
    const auto blocks = parameter_blocks();
    const std::size_t last_layer = network_.layer_count() - 1;
    const std::string prefix = std::to_string(last_layer) + ".";
    for (const auto& b : blocks) {
        if (b.name.starts_with(prefix)) std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size, 0.0);
    }
}

std::uint64_t DetectorModel::parameter_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : params_) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

double binary_cross_entropy(std::span<const double> probabilities, const LabelVector& labels) {
    if (probabilities.size() != labels.size() || labels.empty()) {
        throw ContractError("binary_cross_entropy: probabilities and labels must be non-empty and equal length");
    }
    validate_labels(labels);
    constexpr double kClamp = 1e-12;
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], kClamp, 1.0 - kClamp);
        s -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return s / static_cast<double>(labels.size());
}

}  // namespace robustdet::model
