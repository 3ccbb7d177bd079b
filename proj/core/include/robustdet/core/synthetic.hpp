#pragma once

#include "robustdet/core/dataset.hpp"
#include "robustdet/core/random.hpp"
#include "robustdet/diffusion/predictor.hpp"
#include "robustdet/diffusion/schedule.hpp"

#include <memory>
#include <optional>

namespace robustdet {

/// Smooth Gaussian blobs on a flat background plus optional i.i.d. texture
/// noise. Latent parameters per image: background level, and per blob its
/// centre, width, amplitude and polarity.
struct BlobFamily {
    std::size_t blobs = 2;
    double sigma_lo = 1.5, sigma_hi = 3.0;
    double background_lo = 0.15, background_hi = 0.45;
    double amplitude_lo = 0.25, amplitude_hi = 0.5;
    double texture = 0.065;
};

/// Periodic high-frequency pattern a generator leaves on its output.
enum class Fingerprint { kNone, kCheckerboard, kStripes };

std::string_view to_string(Fingerprint f);
Fingerprint parse_fingerprint(std::string_view text);

struct SyntheticParams {
    std::size_t image_size = 16;
    std::size_t channels = 1;
    std::size_t train_per_class = 750;
    std::size_t test_per_class = 250;
    /// Camera-like family the "real" class is drawn from.
    BlobFamily real{};
    /// Shifted family the toy diffusion model is fitted on.
    BlobFamily shifted{2, 2.0, 3.5, 0.2, 0.5, 0.25, 0.5, 0.0};
    std::size_t diffusion_fit_samples = 3500;
    std::size_t diffusion_steps = 20;
    Fingerprint fingerprint = Fingerprint::kCheckerboard;
    double fingerprint_amplitude = 0.015;
    int jpeg_quality = 95;
    /// Train a small reference classifier and record its held-out accuracy.
    bool measure_separability = true;

    /// Throws ConfigError naming the key on an invalid value.
    void validate() const;
};

struct SyntheticBenchmark {
    DatasetSpec real_train, real_test, fake_train, fake_test;
    std::shared_ptr<const diffusion::GaussianPredictor> predictor;
    diffusion::DiffusionSchedule schedule = diffusion::DiffusionSchedule::linear();
    /// Held-out accuracy of the reference classifier, when measured.
    std::optional<double> reference_accuracy;
};

/// Draws `count` images of the family as 8-bit rasters.
std::vector<RawImage> sample_blob_family(const BlobFamily& family, std::size_t count, std::size_t size,
                                         std::size_t channels, Rng& rng);

/// Fits the toy diffusion backbone on the shifted family.
std::shared_ptr<const diffusion::GaussianPredictor> fit_benchmark_backbone(std::uint64_t seed,
                                                                           const SyntheticParams& params);

/// One domain: real images from params.real and fakes sampled from
/// `backbone` (plus the generator fingerprint). Items are named
/// "<name>-real:<seed>:<index>" / "<name>-fake:<seed>:<index>"; test items
/// follow the train range so the splits never share an identity.
SyntheticBenchmark make_synthetic_domain(std::uint64_t seed, const SyntheticParams& params, const std::string& name,
                                         std::shared_ptr<const diffusion::GaussianPredictor> backbone);

/// fit_benchmark_backbone followed by make_synthetic_domain.
SyntheticBenchmark make_synthetic_benchmark(std::uint64_t seed, const SyntheticParams& params = {},
                                            const std::string& name = "synth");

/// Train split of real and fake merged, and likewise for test.
LabeledImages load_train(const SyntheticBenchmark& b);
LabeledImages load_test(const SyntheticBenchmark& b);

}  // namespace robustdet
