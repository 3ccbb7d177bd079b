#include "robustdet/model/optimizer.hpp"

#include "robustdet/core/error.hpp"

#include <cmath>

namespace robustdet::model {

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate", "must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2", "must be in [0, 1)");
}

Adam::Adam(AdamConfig cfg, std::size_t parameter_count)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
    cfg_.validate();
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ContractError("adam: parameter and gradient sizes must match the optimizer state");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
        params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
    }
}

}  // namespace robustdet::model
