#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/diffusion/ddim.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>

namespace robustdet::diffusion {

/// |x_0 - R(I(x_0))|, elementwise.
struct DireMap {
    Tensor residual;

    double mean() const;
    double max() const;
};

DireMap dire(const Tensor& x0, const DiffusionSchedule& schedule, const NoisePredictor& predictor);

/// Default factor applied to DIRE maps before they are clamped to [0, 1]
/// and fed to a detector.
inline constexpr double kDefaultDireScale = 8.0;

/// Schedule + predictor + feature scaling: everything needed to turn images
/// into detector inputs.
class DireExtractor {
public:
    DireExtractor(DiffusionSchedule schedule, std::shared_ptr<const NoisePredictor> predictor,
                  double scale = kDefaultDireScale);

    const DiffusionSchedule& schedule() const noexcept { return schedule_; }
    const NoisePredictor& predictor() const noexcept { return *predictor_; }
    double scale() const noexcept { return scale_; }

    /// R(I(x)).
    Tensor round_trip(const Tensor& x) const;
    DireMap dire(const Tensor& x) const;
    /// clamp(scale * DIRE(x), 0, 1).
    ImageTensor features(const Tensor& x) const;
    /// Maps a residual x - R(I(x)) to detector features.
    ImageTensor features_from_residual(const Tensor& residual) const;

    std::string backbone_id() const { return predictor_->id(); }
    std::string schedule_id() const { return schedule_.id(); }

private:
    DiffusionSchedule schedule_;
    std::shared_ptr<const NoisePredictor> predictor_;
    double scale_;
};

/// Feature cache for clean images keyed by (item id, backbone id, schedule
/// id). Adversarial inputs depend on the current weights and are never
/// stored here.
class DireCache {
public:
    using Key = std::tuple<std::string, std::string, std::string>;

    /// Features of `images`, computing and storing only the missing items.
    ImageTensor features(const DireExtractor& extractor, const ImageTensor& images,
                         const std::vector<std::string>& item_ids);

    std::size_t size() const;
    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }

private:
    mutable std::mutex mutex_;
    std::map<Key, std::vector<double>> entries_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace robustdet::diffusion
