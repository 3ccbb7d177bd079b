#include "robustdet/diffusion/schedule.hpp"

#include "robustdet/core/error.hpp"

#include <cstdio>

namespace robustdet::diffusion {

std::vector<double> linear_training_alpha_bar(std::size_t train_steps, double beta_start, double beta_end) {
    if (train_steps == 0) throw ContractError("schedule: train_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
        throw ContractError("schedule: need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> out(train_steps);
    double prod = 1.0;
    for (std::size_t i = 0; i < train_steps; ++i) {
        const double frac = train_steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(train_steps - 1);
        prod *= 1.0 - (beta_start + (beta_end - beta_start) * frac);
        out[i] = prod;
    }
    return out;
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alpha_bar, std::vector<std::size_t> train_steps,
                                     std::vector<double> model_alpha_bar, std::string id)
    : alpha_bar_(std::move(alpha_bar)),
      train_steps_(std::move(train_steps)),
      model_alpha_bar_(std::move(model_alpha_bar)),
      id_(std::move(id)) {}

DiffusionSchedule DiffusionSchedule::linear(std::size_t num_steps, std::size_t train_steps, double beta_start,
                                            double beta_end) {
    if (num_steps > train_steps) throw ContractError("schedule: more DDIM steps than training steps");
    const std::vector<double> train = linear_training_alpha_bar(train_steps, beta_start, beta_end);
    std::vector<double> ab{1.0};
    std::vector<std::size_t> steps{0};
    std::vector<double> model_ab{train[0]};
    const std::size_t stride = num_steps == 0 ? 1 : train_steps / num_steps;
    for (std::size_t k = 1; k <= num_steps; ++k) {
        const std::size_t s = k * stride - 1;
        ab.push_back(train[s]);
        steps.push_back(s);
        model_ab.push_back(train[s]);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "linear-T%zu-of%zu-b%.6g-%.6g", num_steps, train_steps, beta_start, beta_end);
    return DiffusionSchedule(std::move(ab), std::move(steps), std::move(model_ab), buf);
}

DiffusionSchedule DiffusionSchedule::from_alpha_bar(std::vector<double> alpha_bar) {
    std::vector<double> ab{1.0};
    std::vector<std::size_t> steps{0};
    std::string id = "explicit";
    for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
        const double a = alpha_bar[i];
        if (!(a > 0.0 && a <= 1.0)) throw ContractError("schedule: alpha_bar values must lie in (0, 1]");
        if (i > 0 && !(a < alpha_bar[i - 1])) throw ContractError("schedule: alpha_bar must be strictly decreasing");
        ab.push_back(a);
        steps.push_back(i + 1);
        char buf[32];
        std::snprintf(buf, sizeof buf, "-%.17g", a);
        id += buf;
    }
    std::vector<double> model_ab = ab;
    return DiffusionSchedule(std::move(ab), std::move(steps), std::move(model_ab), id);
}

Timestep DiffusionSchedule::timestep(std::size_t t) const {
    if (t >= alpha_bar_.size()) throw DiffusionStepError("timestep " + std::to_string(t) + " outside schedule");
    return Timestep{t, train_steps_[t], alpha_bar_[t], model_alpha_bar_[t]};
}

std::string DiffusionSchedule::id() const { return id_; }

}  // namespace robustdet::diffusion
