#include "robustdet/core/tensor.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace robustdet {

namespace {

std::size_t element_count(const Tensor::Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Tensor::Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
        throw ContractError("tensor value count " + std::to_string(values_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
}

std::size_t Tensor::sample_size() const {
    if (shape_.empty()) return 0;
    return element_count(Shape(shape_.begin() + 1, shape_.end()));
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

std::span<double> Tensor::sample(std::size_t i) {
    const std::size_t s = sample_size();
    return std::span<double>(values_).subspan(i * s, s);
}

std::span<const double> Tensor::sample(std::size_t i) const {
    const std::size_t s = sample_size();
    return std::span<const double>(values_).subspan(i * s, s);
}

Tensor Tensor::slice_batch(std::size_t begin, std::size_t end) const {
    if (begin > end || end > batch()) throw ContractError("slice_batch: range out of bounds");
    Shape shape = shape_;
    shape[0] = end - begin;
    const std::size_t s = sample_size();
    return Tensor(std::move(shape), std::vector<double>(values_.begin() + begin * s, values_.begin() + end * s));
}

Tensor Tensor::gather(std::span<const std::size_t> indices) const {
    Shape shape = shape_;
    shape[0] = indices.size();
    Tensor out(std::move(shape));
    const std::size_t s = sample_size();
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= batch()) throw ContractError("gather: index out of bounds");
        std::copy_n(values_.begin() + indices[k] * s, s, out.values_.begin() + k * s);
    }
    return out;
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), values_);
}

Tensor concat_batch(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
        throw ContractError("concat_batch: trailing shapes differ " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
    }
    Tensor::Shape shape = a.shape();
    shape[0] += b.batch();
    std::vector<double> values;
    values.reserve(a.size() + b.size());
    values.insert(values.end(), a.storage().begin(), a.storage().end());
    values.insert(values.end(), b.storage().begin(), b.storage().end());
    return Tensor(std::move(shape), std::move(values));
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double mean(const Tensor& t) {
    if (t.empty()) return 0.0;
    return std::accumulate(t.storage().begin(), t.storage().end(), 0.0) / static_cast<double>(t.size());
}

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return std::sqrt(s);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(context) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
    }
}

// ---------------------------------------------------------------------------

void validate_labels(const LabelVector& labels) {
    for (int y : labels) {
        if (y != 0 && y != 1) throw ContractError("label " + std::to_string(y) + " outside {0, 1}");
    }
}

void validate_image_tensor(const Tensor& t) {
    if (t.rank() != 4) throw ContractError("image tensor must have rank 4 (N, C, H, W)");
    if (t.dim(0) < 1) throw ContractError("image tensor must hold at least one image");
    if (t.dim(1) != 1 && t.dim(1) != 3) throw ContractError("image tensor must have 1 or 3 channels");
    if (t.dim(2) < 8 || t.dim(3) < 8) throw ContractError("image tensor height and width must be >= 8");
    for (double v : t.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ContractError("image tensor value outside [0, 1]");
    }
}

ImageTensor::ImageTensor(Tensor pixels) : pixels_(std::move(pixels)) {
    validate_image_tensor(pixels_);
}

ImageTensor::ImageTensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill)
    : ImageTensor(Tensor({n, c, h, w}, fill)) {}

ImageTensor ImageTensor::clamped(Tensor pixels) {
    for (double& v : pixels.values()) v = std::clamp(v, 0.0, 1.0);
    return ImageTensor(std::move(pixels));
}

ImageTensor ImageTensor::slice_batch(std::size_t begin, std::size_t end) const {
    return ImageTensor(pixels_.slice_batch(begin, end));
}

ImageTensor ImageTensor::gather(std::span<const std::size_t> indices) const {
    return ImageTensor(pixels_.gather(indices));
}

ImageTensor concat_batch(const ImageTensor& a, const ImageTensor& b) {
    return ImageTensor(concat_batch(a.tensor(), b.tensor()));
}

}  // namespace robustdet
