#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace robustdet::model {

struct AdamConfig {
    double learning_rate = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Throws ConfigError for a non-positive rate or betas outside [0, 1).
    void validate() const;
};

/// Adam with bias correction, operating on a flat parameter buffer.
class Adam {
public:
    Adam(AdamConfig cfg, std::size_t parameter_count);

    void step(std::span<double> params, std::span<const double> grads);
    std::size_t steps_taken() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace robustdet::model
