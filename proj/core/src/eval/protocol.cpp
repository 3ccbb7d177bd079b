#include "robustdet/eval/protocol.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/eval/metrics.hpp"

#include <algorithm>

namespace robustdet::eval {

namespace {

bool is_dire(const EvaluatedModel& m) { return m.detector->spec().input_space == model::InputSpace::kDire; }

void check_model(const EvaluatedModel& m) {
    if (!m.detector) throw ContractError("evaluate: model '" + m.method + "' has no detector");
    if (is_dire(m) && !m.extractor) {
        throw ConfigError("diffusion", "model '" + m.method + "' consumes DIRE features but has no diffusion backbone");
    }
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch) { return seed + 0x9e3779b97f4a7c15ULL * (batch + 1); }

}  // namespace

EvalCell evaluate_cell(const EvaluatedModel& m, const LabeledImages& data, const ProtocolConfig& cfg) {
    check_model(m);
    if (data.size() == 0) throw EmptyDatasetError("evaluate: empty test set");
    LabelVector clean_pred, adv_pred;
    std::size_t index = 0;
    for (const Batch& b : make_batches(data, cfg.batch_size)) {
        attack::AttackConfig a = cfg.attack;
        a.seed = batch_seed(cfg.attack.seed, index++);
        LabelVector pc, pa;
        if (is_dire(m)) {
            pc = m.detector->predict(m.extractor->features(b.images));
            const ImageTensor adv =
                attack::pgd_through_dire(*m.detector, b.images, b.labels, a, cfg.grad_mode, *m.extractor, m.surrogate);
            pa = m.detector->predict(m.extractor->features(adv));
        } else {
            pc = m.detector->predict(b.images);
            pa = m.detector->predict(attack::pgd(*m.detector, b.images, b.labels, a));
        }
        clean_pred.insert(clean_pred.end(), pc.begin(), pc.end());
        adv_pred.insert(adv_pred.end(), pa.begin(), pa.end());
    }
    LabelVector truth;
    for (const Batch& b : make_batches(data, cfg.batch_size)) truth.insert(truth.end(), b.labels.begin(), b.labels.end());
    EvalCell cell;
    cell.acc_clean = accuracy(clean_pred, truth);
    cell.acc_adv = accuracy(adv_pred, truth);
    cell.robustness_score = robustness_score(cell.acc_adv, cell.acc_clean);
    return cell;
}

EvalReport evaluate_protocol(const std::vector<EvaluatedModel>& models, const std::vector<DatasetSpec>& datasets,
                             const ProtocolConfig& cfg, EvalTrace* trace) {
    cfg.attack.validate();
    EvalReport report;
    report.protocol = cfg.protocol;
    report.attack = echo(cfg.attack, cfg.grad_mode);

    for (const auto& d : datasets) {
        if (d.split != DatasetSplit::kTest) throw ProtocolError("dataset '" + d.name + "' is not a test split");
        report.datasets.push_back(d.name);
    }
    for (const auto& m : models) {
        check_model(m);
        if (std::find(report.methods.begin(), report.methods.end(), m.method) == report.methods.end()) {
            report.methods.push_back(m.method);
        }
    }

    std::set<std::string> held_out;
    if (cfg.protocol == Protocol::kCrossDomain) {
        report.training_datasets = cfg.training_datasets;
        for (const auto& d : datasets) {
            if (std::find(cfg.training_datasets.begin(), cfg.training_datasets.end(), d.name) ==
                cfg.training_datasets.end()) {
                held_out.insert(d.name);
                report.held_out_datasets.push_back(d.name);
            }
        }
        if (held_out.empty()) throw ProtocolError("cross-domain protocol needs at least one held-out dataset");
    }

    for (const auto& d : datasets) {
        const LabeledImages data = load_images(d);
        for (const auto& m : models) {
            if (m.training.datasets.contains(d.name) && held_out.contains(d.name)) {
                throw ProtocolError("held-out dataset '" + d.name + "' contributed training batches to '" + m.method + "'");
            }
            for (const auto& id : data.ids) {
                if (m.training.items.contains(id)) {
                    throw ProtocolError("test item '" + id + "' of '" + d.name + "' was used to train '" + m.method + "'");
                }
            }
            const CellKey key{m.method, d.name, m.setting};
            if (report.cells.contains(key)) throw ProtocolError("cell evaluated twice: " + m.method + "/" + d.name);
            const std::uint64_t before = m.detector->parameter_hash();
            report.cells[key] = evaluate_cell(m, data, cfg);
            if (m.detector->parameter_hash() != before) throw ProtocolError("evaluation modified model parameters");
            if (trace) trace->attacks.push_back({key, before, data.size()});
        }
    }
    return report;
}

}  // namespace robustdet::eval
