#include "robustdet/diffusion/dire.hpp"

#include "robustdet/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace robustdet::diffusion {

double DireMap::mean() const { return robustdet::mean(residual); }
double DireMap::max() const { return max_abs(residual); }

DireMap dire(const Tensor& x0, const DiffusionSchedule& schedule, const NoisePredictor& predictor) {
    const Tensor rec = reconstruct(invert(x0, schedule, predictor), schedule, predictor);
    Tensor r(x0.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::abs(x0[i] - rec[i]);
    return {std::move(r)};
}

DireExtractor::DireExtractor(DiffusionSchedule schedule, std::shared_ptr<const NoisePredictor> predictor, double scale)
    : schedule_(std::move(schedule)), predictor_(std::move(predictor)), scale_(scale) {
    if (!predictor_) throw ConfigError("diffusion", "DIRE extraction needs a noise predictor");
    if (!(scale_ > 0.0)) throw ConfigError("diffusion.dire_scale", "must be > 0");
}

Tensor DireExtractor::round_trip(const Tensor& x) const {
    return reconstruct(invert(x, schedule_, *predictor_), schedule_, *predictor_);
}

DireMap DireExtractor::dire(const Tensor& x) const { return diffusion::dire(x, schedule_, *predictor_); }

ImageTensor DireExtractor::features_from_residual(const Tensor& residual) const {
    Tensor f(residual.shape());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::min(1.0, scale_ * std::abs(residual[i]));
    return ImageTensor(std::move(f));
}

ImageTensor DireExtractor::features(const Tensor& x) const {
    const Tensor rec = round_trip(x);
    Tensor r(x.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - rec[i];
    return features_from_residual(r);
}

ImageTensor DireCache::features(const DireExtractor& extractor, const ImageTensor& images,
                                const std::vector<std::string>& item_ids) {
    if (item_ids.size() != images.batch()) throw ContractError("dire cache: one id per image required");
    const std::string backbone = extractor.backbone_id(), sched = extractor.schedule_id();
    Tensor out(images.tensor().shape());
    const std::size_t s = out.sample_size();

    std::vector<std::size_t> missing;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < item_ids.size(); ++i) {
            const auto it = entries_.find({item_ids[i], backbone, sched});
            if (it == entries_.end()) {
                missing.push_back(i);
            } else {
                std::copy(it->second.begin(), it->second.end(), out.data() + i * s);
                ++hits_;
            }
        }
    }
    if (!missing.empty()) {
        const ImageTensor computed = extractor.features(images.tensor().gather(missing));
        std::lock_guard lock(mutex_);
        for (std::size_t k = 0; k < missing.size(); ++k) {
            const auto src = computed.tensor().sample(k);
            std::copy(src.begin(), src.end(), out.data() + missing[k] * s);
            entries_[{item_ids[missing[k]], backbone, sched}] = std::vector<double>(src.begin(), src.end());
            ++misses_;
        }
    }
    return ImageTensor(std::move(out));
}

std::size_t DireCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace robustdet::diffusion
