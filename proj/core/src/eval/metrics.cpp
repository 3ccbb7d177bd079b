#include "robustdet/eval/metrics.hpp"

#include "robustdet/core/error.hpp"

#include <cmath>

namespace robustdet::eval {

double accuracy(const LabelVector& predictions, const LabelVector& truth) {
    if (predictions.empty()) throw ContractError("accuracy: empty prediction vector");
    if (predictions.size() != truth.size()) throw ContractError("accuracy: length mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::optional<double> robustness_score(double acc_adv, double acc_clean) {
    if (!(acc_adv >= 0.0 && acc_adv <= 1.0) || !(acc_clean >= 0.0 && acc_clean <= 1.0)) {
        throw ContractError("robustness_score: accuracies must lie in [0, 1]");
    }
    if (acc_clean == 0.0) return std::nullopt;
    return acc_adv / acc_clean;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace robustdet::eval
