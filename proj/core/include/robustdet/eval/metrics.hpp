#pragma once

#include "robustdet/core/image.hpp"

#include <optional>

namespace robustdet::eval {

/// Fraction of equal entries. Throws ContractError for empty or
/// mismatched inputs.
double accuracy(const LabelVector& predictions, const LabelVector& truth);

/// acc_adv / acc_clean; empty when acc_clean is 0. Throws ContractError if
/// either accuracy is outside [0, 1].
std::optional<double> robustness_score(double acc_adv, double acc_clean);

/// Rounds to two decimals, the precision reports use for scores.
double round2(double v);

}  // namespace robustdet::eval
