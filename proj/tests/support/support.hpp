#pragma once

#include "robustdet/core/dataset.hpp"
#include "robustdet/core/random.hpp"
#include "robustdet/core/synthetic.hpp"
#include "robustdet/model/detector.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace robustdet::testing {

inline ImageTensor random_images(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
                                 double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    Tensor t({n, c, h, w});
    for (double& v : t.storage()) v = rng.uniform(lo, hi);
    return ImageTensor(std::move(t));
}

inline LabelVector alternating_labels(std::size_t n) {
    LabelVector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    return y;
}

/// Linear detector whose class-1 logit is w·x + b and class-0 logit is 0,
/// so p1 = sigmoid(w·x + b).
inline model::DetectorModel logistic_model(const std::vector<double>& w, double b, std::size_t c, std::size_t h,
                                           std::size_t wd) {
    const std::size_t d = c * h * wd;
    std::vector<double> params(2 * d + 2, 0.0);
    for (std::size_t i = 0; i < d; ++i) params[d + i] = w[i];
    params[2 * d + 1] = b;
    return model::DetectorModel::from_parameters({model::Architecture::kLinear, model::InputSpace::kPixel, c, h, wd},
                                                 std::move(params));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// A small benchmark that builds in well under a second.
inline SyntheticParams tiny_params(std::size_t train = 60, std::size_t test = 20) {
    SyntheticParams p;
    p.train_per_class = train;
    p.test_per_class = test;
    p.diffusion_fit_samples = 600;
    p.measure_separability = false;
    return p;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
        path_ = std::filesystem::temp_directory_path() / ("robustdet-" + tag + "-" + std::to_string(rng.next() % 1000000007));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace robustdet::testing
