#include "robustdet/advtrain/train.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"

#include <chrono>
#include <cstdio>

namespace robustdet::advtrain {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("training.epochs", "must be >= 1");
    if (batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("training.lambda", "must be >= 0");
    optimizer.validate();
}

std::string TrainReport::to_csv(bool include_seconds) const {
    std::string out = include_seconds ? "epoch,clean_loss,adv_loss,total_loss,seconds\n"
                                      : "epoch,clean_loss,adv_loss,total_loss\n";
    char buf[160];
    for (const auto& e : epochs) {
        if (include_seconds) {
            std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.3f\n", e.epoch, e.clean_loss, e.adv_loss,
                          e.total_loss, e.seconds);
        } else {
            std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g\n", e.epoch, e.clean_loss, e.adv_loss,
                          e.total_loss);
        }
        out += buf;
    }
    return out;
}

double combined_loss(double l_clean, double l_adv, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("training.lambda", "must be >= 0");
    return l_clean + lambda * l_adv;
}

std::uint64_t attack_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch) {
    return Rng::derive(seed, 0x5eed0000ULL + (static_cast<std::uint64_t>(epoch) << 32) + batch).next();
}

namespace {

using Clock = std::chrono::steady_clock;

// Per-batch hook: accumulates gradients into `grad` and returns
// (clean loss, adversarial loss, total loss) for the batch.
struct BatchLosses {
    double clean = 0.0, adv = 0.0, total = 0.0;
};
using BatchStep = std::function<BatchLosses(const Batch&, std::size_t epoch, std::size_t index, std::vector<double>& grad)>;

// Features the final accuracy is measured on.
using FeatureFn = std::function<ImageTensor(const Batch&)>;

TrainReport run_loop(model::DetectorModel& model, const LabeledImages& data, const TrainConfig& cfg,
                     const BatchStep& step, const FeatureFn& features, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.size() == 0) throw EmptyDatasetError("training data is empty");
    TrainReport report;
    model::Adam adam(cfg.optimizer, model.parameter_count());
    std::vector<double> grad(model.parameter_count());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = Clock::now();
        const std::uint64_t shuffle = Rng::derive(cfg.seed, epoch).next();
        const std::vector<Batch> batches = make_batches(data, cfg.batch_size, shuffle);
        EpochStats stats;
        stats.epoch = epoch + 1;
        double weight_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            std::fill(grad.begin(), grad.end(), 0.0);
            const BatchLosses l = step(batches[b], epoch, b, grad);
            adam.step(model.parameters(), grad);
            ++report.optimizer_steps;
            const auto w = static_cast<double>(batches[b].labels.size());
            stats.clean_loss += w * l.clean;
            stats.adv_loss += w * l.adv;
            stats.total_loss += w * l.total;
            weight_sum += w;
            for (std::size_t i : batches[b].indices) {
                report.datasets_seen.insert(data.origins[i]);
                report.items_seen.insert(data.ids[i]);
            }
        }
        stats.clean_loss /= weight_sum;
        stats.adv_loss /= weight_sum;
        stats.total_loss /= weight_sum;
        stats.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        report.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }

    std::size_t correct = 0;
    for (const Batch& batch : make_batches(data, 256)) {
        const LabelVector pred = model.predict(features(batch));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i] ? 1 : 0;
    }
    report.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return report;
}

ImageTensor pixel_features(const Batch& b) { return b.images; }

std::vector<std::string> batch_ids(const LabeledImages& data, const Batch& batch) {
    std::vector<std::string> ids;
    ids.reserve(batch.indices.size());
    for (std::size_t i : batch.indices) ids.push_back(data.ids[i]);
    return ids;
}

ImageTensor clean_dire_features(const LabeledImages& data, const Batch& batch, const DireTrainingContext& ctx) {
    if (ctx.cache) return ctx.cache->features(*ctx.extractor, batch.images, batch_ids(data, batch));
    return ctx.extractor->features(batch.images);
}

void require_backbone(const DireTrainingContext& ctx) {
    if (!ctx.extractor) throw ConfigError("diffusion", "DIRE training needs a diffusion backbone");
}

}  // namespace

TrainReport train_standard(model::DetectorModel& model, const LabeledImages& data, const TrainConfig& cfg,
                           const EpochCallback& on_epoch) {
    std::size_t clean_views = 0;
    auto step = [&](const Batch& batch, std::size_t, std::size_t, std::vector<double>& grad) {
        const double l = model.accumulate_gradient(batch.images, batch.labels, 1.0, grad);
        ++clean_views;
        return BatchLosses{l, 0.0, l};
    };
    TrainReport r = run_loop(model, data, cfg, step, pixel_features, on_epoch);
    r.clean_views = clean_views;
    return r;
}

TrainReport train_adversarial(model::DetectorModel& model, const LabeledImages& data, const TrainConfig& cfg,
                              const attack::AttackConfig& atk, const EpochCallback& on_epoch) {
    atk.validate();
    std::size_t invocations = 0, clean_views = 0, adv_views = 0;
    auto step = [&](const Batch& batch, std::size_t epoch, std::size_t index, std::vector<double>& grad) {
        attack::AttackConfig a = atk;
        a.seed = attack_seed(cfg.seed, epoch, index);
        // The attack sees the weights as they are before this batch's update.
        const ImageTensor adv = attack::pgd(model, batch.images, batch.labels, a);
        ++invocations;
        const double l1 = model.accumulate_gradient(batch.images, batch.labels, 1.0, grad);
        const double l2 = model.accumulate_gradient(adv, batch.labels, cfg.lambda, grad);
        ++clean_views;
        ++adv_views;
        return BatchLosses{l1, l2, combined_loss(l1, l2, cfg.lambda)};
    };
    TrainReport r = run_loop(model, data, cfg, step, pixel_features, on_epoch);
    r.attack_invocations = invocations;
    r.clean_views = clean_views;
    r.adversarial_views = adv_views;
    return r;
}

TrainReport train_adversarial_dire(model::DetectorModel& model_on_dire, const LabeledImages& data,
                                   const TrainConfig& cfg, const attack::AttackConfig& atk,
                                   const DireTrainingContext& ctx, const EpochCallback& on_epoch) {
    require_backbone(ctx);
    atk.validate();
    std::size_t invocations = 0, clean_views = 0, adv_views = 0;
    auto step = [&](const Batch& batch, std::size_t epoch, std::size_t index, std::vector<double>& grad) {
        attack::AttackConfig a = atk;
        a.seed = attack_seed(cfg.seed, epoch, index);
        const ImageTensor adv = attack::pgd_through_dire(model_on_dire, batch.images, batch.labels, a,
                                                         ctx.grad_mode, *ctx.extractor, ctx.surrogate);
        ++invocations;
        const ImageTensor d_clean = clean_dire_features(data, batch, ctx);
        const ImageTensor d_adv = ctx.extractor->features(adv);
        const ImageTensor combined = concat_batch(d_clean, d_adv);
        LabelVector labels = batch.labels;
        labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
        const double total = model_on_dire.accumulate_gradient(combined, labels, 1.0, grad);
        // Halves are equal in size, so the adversarial half's loss follows
        // from the total and the clean half.
        const double clean = model_on_dire.loss(d_clean, batch.labels);
        ++clean_views;
        ++adv_views;
        return BatchLosses{clean, 2.0 * total - clean, total};
    };
    auto features = [&](const Batch& b) { return clean_dire_features(data, b, ctx); };
    TrainReport r = run_loop(model_on_dire, data, cfg, step, features, on_epoch);
    r.attack_invocations = invocations;
    r.clean_views = clean_views;
    r.adversarial_views = adv_views;
    return r;
}

TrainReport train_standard_dire(model::DetectorModel& model_on_dire, const LabeledImages& data,
                                const TrainConfig& cfg, const DireTrainingContext& ctx,
                                const EpochCallback& on_epoch) {
    require_backbone(ctx);
    std::size_t clean_views = 0;
    auto step = [&](const Batch& batch, std::size_t, std::size_t, std::vector<double>& grad) {
        const double l =
            model_on_dire.accumulate_gradient(clean_dire_features(data, batch, ctx), batch.labels, 1.0, grad);
        ++clean_views;
        return BatchLosses{l, 0.0, l};
    };
    auto features = [&](const Batch& b) { return clean_dire_features(data, b, ctx); };
    TrainReport r = run_loop(model_on_dire, data, cfg, step, features, on_epoch);
    r.clean_views = clean_views;
    return r;
}

}  // namespace robustdet::advtrain
