#pragma once

#include "robustdet/core/dataset.hpp"
#include "robustdet/eval/report.hpp"
#include "robustdet/model/detector.hpp"

#include <set>

namespace robustdet::eval {

/// Which data a model was trained on, as recorded by the training loop.
struct TrainingManifest {
    std::set<std::string> datasets;
    std::set<std::string> items;
};

struct EvaluatedModel {
    std::string method;
    Setting setting = Setting::kWithoutAT;
    const model::DetectorModel* detector = nullptr;
    /// Required for DIRE-space detectors.
    const diffusion::DireExtractor* extractor = nullptr;
    /// Pixel-space detector used by the surrogate gradient mode.
    const model::DetectorModel* surrogate = nullptr;
    TrainingManifest training;
};

struct ProtocolConfig {
    Protocol protocol = Protocol::kAllSet;
    attack::AttackConfig attack;
    attack::GradMode grad_mode = attack::GradMode::kIdentityApproximation;
    /// Cross-domain only: datasets allowed in training. Every other test
    /// dataset is held out.
    std::vector<std::string> training_datasets;
    std::size_t batch_size = 256;
};

/// One adversarial generation pass, kept to show that every cell was
/// attacked against the model it reports on.
struct AttackRecord {
    CellKey cell;
    std::uint64_t model_hash = 0;
    std::size_t images = 0;
};

struct EvalTrace {
    std::vector<AttackRecord> attacks;
};

/// Fills one cell per (model, dataset): clean accuracy on the full test
/// split, then adversarial accuracy on examples regenerated against that
/// model. Throws ProtocolError when a dataset is not a test split, when a
/// held-out dataset (cross-domain) or a test item appears in a model's
/// training manifest, or if evaluation changed a model's parameters.
EvalReport evaluate_protocol(const std::vector<EvaluatedModel>& models, const std::vector<DatasetSpec>& datasets,
                             const ProtocolConfig& cfg, EvalTrace* trace = nullptr);

/// Clean and adversarial accuracy of one model on one labelled set.
EvalCell evaluate_cell(const EvaluatedModel& model, const LabeledImages& data, const ProtocolConfig& cfg);

}  // namespace robustdet::eval
