#pragma once

#include "robustdet/core/tensor.hpp"

#include <vector>

namespace robustdet {

/// Class labels: 0 = real, 1 = synthetic.
using LabelVector = std::vector<int>;

/// Throws ContractError if any label is outside {0, 1}.
void validate_labels(const LabelVector& labels);

/// Batched pixel data laid out as (N, C, H, W) with every value in [0, 1].
///
/// The invariant is checked at construction; operations that may leave the
/// range (perturbation, DDIM) work on Tensor and re-enter through
/// ImageTensor::clamped or the checked constructor.
class ImageTensor {
public:
    ImageTensor() = default;
    /// Throws ContractError if the shape or value range is invalid.
    explicit ImageTensor(Tensor pixels);
    ImageTensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0);

    /// Clamps every element into [0, 1] before validating the shape.
    static ImageTensor clamped(Tensor pixels);

    const Tensor& tensor() const noexcept { return pixels_; }
    operator const Tensor&() const noexcept { return pixels_; }

    std::size_t batch() const { return pixels_.dim(0); }
    std::size_t channels() const { return pixels_.dim(1); }
    std::size_t height() const { return pixels_.dim(2); }
    std::size_t width() const { return pixels_.dim(3); }

    ImageTensor slice_batch(std::size_t begin, std::size_t end) const;
    ImageTensor gather(std::span<const std::size_t> indices) const;

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    Tensor pixels_;
};

ImageTensor concat_batch(const ImageTensor& a, const ImageTensor& b);

/// Throws ContractError unless `t` is a valid image batch.
void validate_image_tensor(const Tensor& t);

}  // namespace robustdet
