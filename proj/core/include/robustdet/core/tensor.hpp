#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace robustdet {

/// Dense row-major array of doubles with a runtime shape. The first
/// dimension is always the batch dimension.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
    /// Number of elements per batch entry.
    std::size_t sample_size() const;

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& storage() noexcept { return values_; }
    const std::vector<double>& storage() const noexcept { return values_; }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Element access for rank-4 tensors (n, c, h, w).
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    std::span<double> sample(std::size_t i);
    std::span<const double> sample(std::size_t i) const;

    /// Copy of batch entries [begin, end).
    Tensor slice_batch(std::size_t begin, std::size_t end) const;
    /// Copy of the listed batch entries, in order.
    Tensor gather(std::span<const std::size_t> indices) const;
    Tensor reshaped(Shape shape) const;

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

/// Concatenate along the batch dimension; trailing shapes must match.
Tensor concat_batch(const Tensor& a, const Tensor& b);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean(const Tensor& t);
double l2_norm(const Tensor& t);

/// Shape checks throwing ContractError with the given context.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

}  // namespace robustdet
