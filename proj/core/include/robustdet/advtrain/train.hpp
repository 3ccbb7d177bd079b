#pragma once

#include "robustdet/attack/dire_attack.hpp"
#include "robustdet/core/dataset.hpp"
#include "robustdet/model/detector.hpp"
#include "robustdet/model/optimizer.hpp"

#include <functional>
#include <set>

namespace robustdet::advtrain {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double lambda = 1.0;
    model::AdamConfig optimizer;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the key on an invalid value.
    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double clean_loss = 0.0;
    double adv_loss = 0.0;
    double total_loss = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double final_train_accuracy = 0.0;
    std::size_t optimizer_steps = 0;
    /// Number of attack calls; one per batch per epoch for adversarial modes.
    std::size_t attack_invocations = 0;
    /// Clean and adversarial views consumed by optimizer steps.
    std::size_t clean_views = 0;
    std::size_t adversarial_views = 0;
    /// Dataset names and item ids that contributed to at least one batch.
    std::set<std::string> datasets_seen;
    std::set<std::string> items_seen;

    /// epoch,clean_loss,adv_loss,total_loss,seconds
    std::string to_csv(bool include_seconds = true) const;
};

/// l_clean + λ l_adv. Throws ConfigError for λ < 0.
double combined_loss(double l_clean, double l_adv, double lambda);

/// Called after every epoch; handy for progress output.
using EpochCallback = std::function<void(const EpochStats&)>;

/// Minimizes mean cross-entropy. Throws EmptyDatasetError for empty data.
TrainReport train_standard(model::DetectorModel& model, const LabeledImages& data, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {});

/// Every batch contributes L(f(x), y) + λ L(f(x'), y) with x' regenerated by
/// PGD against the current weights.
TrainReport train_adversarial(model::DetectorModel& model, const LabeledImages& data, const TrainConfig& cfg,
                              const attack::AttackConfig& atk, const EpochCallback& on_epoch = {});

struct DireTrainingContext {
    const diffusion::DireExtractor* extractor = nullptr;
    attack::GradMode grad_mode = attack::GradMode::kIdentityApproximation;
    /// Pixel-space detector for surrogate gradients.
    const model::DetectorModel* surrogate = nullptr;
    /// Optional cache for clean-image features.
    diffusion::DireCache* cache = nullptr;
};

/// Adversarial training on DIRE features: per batch, x' from
/// pgd_through_dire, then one cross-entropy step on the concatenation of
/// DIRE(x) and DIRE(x'). Throws ConfigError without a diffusion backbone.
TrainReport train_adversarial_dire(model::DetectorModel& model_on_dire, const LabeledImages& data,
                                   const TrainConfig& cfg, const attack::AttackConfig& atk,
                                   const DireTrainingContext& ctx, const EpochCallback& on_epoch = {});

/// Plain training on DIRE features (the "w/o AT" DIRE baseline).
TrainReport train_standard_dire(model::DetectorModel& model_on_dire, const LabeledImages& data,
                                const TrainConfig& cfg, const DireTrainingContext& ctx,
                                const EpochCallback& on_epoch = {});

/// Seed for the random start of the attack on (epoch, batch).
std::uint64_t attack_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch);

}  // namespace robustdet::advtrain
