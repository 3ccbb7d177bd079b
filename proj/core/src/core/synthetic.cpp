#include "robustdet/core/synthetic.hpp"

#include "robustdet/advtrain/train.hpp"
#include "robustdet/core/error.hpp"
#include "robustdet/diffusion/ddim.hpp"
#include "robustdet/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace robustdet {

std::string_view to_string(Fingerprint f) {
    switch (f) {
        case Fingerprint::kNone: return "none";
        case Fingerprint::kCheckerboard: return "checkerboard";
        case Fingerprint::kStripes: return "stripes";
    }
    return "none";
}

Fingerprint parse_fingerprint(std::string_view text) {
    if (text == "none") return Fingerprint::kNone;
    if (text == "checkerboard") return Fingerprint::kCheckerboard;
    if (text == "stripes") return Fingerprint::kStripes;
    throw ConfigError("dataset.fingerprint", "expected none|checkerboard|stripes, got '" + std::string(text) + "'");
}

void SyntheticParams::validate() const {
    if (image_size < 8) throw ConfigError("dataset.image_size", "must be >= 8");
    if (channels != 1 && channels != 3) throw ConfigError("dataset.channels", "must be 1 or 3");
    if (train_per_class < 1) throw ConfigError("dataset.train_per_class", "must be >= 1");
    if (test_per_class < 1) throw ConfigError("dataset.test_per_class", "must be >= 1");
    if (diffusion_fit_samples < 2) throw ConfigError("dataset.diffusion_fit_samples", "must be >= 2");
    if (jpeg_quality < 1 || jpeg_quality > 100) throw ConfigError("dataset.jpeg_quality", "must be in [1, 100]");
    if (!(fingerprint_amplitude >= 0.0)) throw ConfigError("dataset.fingerprint_amplitude", "must be >= 0");
    for (const BlobFamily* f : {&real, &shifted}) {
        if (f->sigma_lo <= 0.0 || f->sigma_hi < f->sigma_lo || f->background_hi < f->background_lo ||
            f->amplitude_hi < f->amplitude_lo || f->texture < 0.0) {
            throw ConfigError("dataset.family", "inconsistent blob family ranges");
        }
    }
}

namespace {

Tensor blob_tensor(const BlobFamily& family, std::size_t count, std::size_t size, std::size_t channels, Rng& rng) {
    Tensor out({count, channels, size, size});
    const double hi = static_cast<double>(size) - 4.0;
    for (std::size_t n = 0; n < count; ++n) {
        std::vector<double> tint(channels, 1.0);
        if (channels > 1) {
            for (double& t : tint) t = rng.uniform(0.6, 1.0);
        }
        const double background = rng.uniform(family.background_lo, family.background_hi);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < size * size; ++i) out[(n * channels + c) * size * size + i] = background;
        }
        for (std::size_t b = 0; b < family.blobs; ++b) {
            const double cx = rng.uniform(3.0, hi), cy = rng.uniform(3.0, hi);
            const double s = rng.uniform(family.sigma_lo, family.sigma_hi);
            const double amp = rng.uniform(family.amplitude_lo, family.amplitude_hi) * (rng.below(2) ? 1.0 : -1.0);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                    const double v = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
                    for (std::size_t c = 0; c < channels; ++c) out.at(n, c, y, x) += tint[c] * v;
                }
            }
        }
        if (family.texture > 0.0) {
            for (double& v : out.sample(n)) v += rng.normal(0.0, family.texture);
        }
    }
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::vector<RawImage> to_rasters(const Tensor& t) {
    std::vector<RawImage> out;
    out.reserve(t.batch());
    for (std::size_t i = 0; i < t.batch(); ++i) out.push_back(to_raw_image(t, i));
    return out;
}

double fingerprint_value(Fingerprint f, std::size_t y, std::size_t x) {
    switch (f) {
        case Fingerprint::kNone: return 0.0;
        case Fingerprint::kCheckerboard: return (x + y) % 2 ? 1.0 : -1.0;
        case Fingerprint::kStripes: return x % 2 ? 1.0 : -1.0;
    }
    return 0.0;
}

DatasetSpec synthetic_spec(const std::string& generator, std::uint64_t seed, DatasetRole role, DatasetSplit split,
                           std::size_t first, std::vector<RawImage> images, const PreprocessConfig& pre) {
    DatasetSpec spec;
    spec.name = generator;
    spec.role = role;
    spec.split = split;
    spec.preprocess = pre;
    spec.source = SyntheticSource{generator, seed, first, std::make_shared<const std::vector<RawImage>>(std::move(images))};
    return spec;
}

}  // namespace

std::vector<RawImage> sample_blob_family(const BlobFamily& family, std::size_t count, std::size_t size,
                                         std::size_t channels, Rng& rng) {
    return to_rasters(blob_tensor(family, count, size, channels, rng));
}

std::shared_ptr<const diffusion::GaussianPredictor> fit_benchmark_backbone(std::uint64_t seed,
                                                                           const SyntheticParams& params) {
    params.validate();
    Rng rng = Rng::derive(seed, 1);
    Tensor fit = blob_tensor(params.shifted, params.diffusion_fit_samples, params.image_size, params.channels, rng);
    // The generator learns from 8-bit images like every other consumer.
    for (double& v : fit.values()) v = std::round(v * 255.0) / 255.0;
    return std::make_shared<const diffusion::GaussianPredictor>(diffusion::train_toy_diffusion(fit));
}

SyntheticBenchmark make_synthetic_domain(std::uint64_t seed, const SyntheticParams& params, const std::string& name,
                                         std::shared_ptr<const diffusion::GaussianPredictor> backbone) {
    params.validate();
    if (!backbone) throw ConfigError("diffusion", "synthetic fakes need a diffusion backbone");
    const std::size_t s = params.image_size, c = params.channels;
    if (backbone->channels() != c || backbone->height() != s || backbone->width() != s) {
        throw ConfigError("dataset.image_size", "diffusion backbone was fitted for a different image shape");
    }
    const std::size_t n_train = params.train_per_class, n_test = params.test_per_class, total = n_train + n_test;

    SyntheticBenchmark b;
    b.predictor = backbone;
    b.schedule = diffusion::DiffusionSchedule::linear(params.diffusion_steps);

    Rng real_rng = Rng::derive(seed, 2);
    std::vector<RawImage> real = sample_blob_family(params.real, total, s, c, real_rng);

    Tensor fake = diffusion::sample_images(total, c, s, s, b.schedule, *backbone, Rng::derive(seed, 3).next());
    for (std::size_t n = 0; n < total; ++n) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < s; ++y) {
                for (std::size_t x = 0; x < s; ++x) {
                    double& v = fake.at(n, ch, y, x);
                    v = std::clamp(v + params.fingerprint_amplitude * fingerprint_value(params.fingerprint, y, x), 0.0, 1.0);
                }
            }
        }
    }
    std::vector<RawImage> fakes = to_rasters(fake);

    const PreprocessConfig pre{params.jpeg_quality, s};
    auto split = [](std::vector<RawImage>& v, std::size_t n) {
        std::vector<RawImage> head(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
        std::vector<RawImage> tail(v.begin() + static_cast<std::ptrdiff_t>(n), v.end());
        return std::pair(std::move(head), std::move(tail));
    };
    auto [real_tr, real_te] = split(real, n_train);
    auto [fake_tr, fake_te] = split(fakes, n_train);
    b.real_train = synthetic_spec(name + "-real", seed, DatasetRole::kReal, DatasetSplit::kTrain, 0, std::move(real_tr), pre);
    b.real_test = synthetic_spec(name + "-real", seed, DatasetRole::kReal, DatasetSplit::kTest, n_train, std::move(real_te), pre);
    b.fake_train = synthetic_spec(name + "-fake", seed, DatasetRole::kFake, DatasetSplit::kTrain, 0, std::move(fake_tr), pre);
    b.fake_test = synthetic_spec(name + "-fake", seed, DatasetRole::kFake, DatasetSplit::kTest, n_train, std::move(fake_te), pre);
    require_disjoint(b.real_train, b.real_test);
    require_disjoint(b.fake_train, b.fake_test);

    if (params.measure_separability) {
        model::DetectorModel ref = model::DetectorModel::create({model::Architecture::kSmallConv,
                                                                 model::InputSpace::kPixel, c, s, s},
                                                                Rng::derive(seed, 4).next());
        advtrain::TrainConfig tc;
        tc.epochs = 3;
        tc.seed = Rng::derive(seed, 5).next();
        advtrain::train_standard(ref, load_train(b), tc);
        const LabeledImages test = load_test(b);
        b.reference_accuracy = eval::accuracy(ref.predict(test.images), test.labels);
    }
    return b;
}

SyntheticBenchmark make_synthetic_benchmark(std::uint64_t seed, const SyntheticParams& params,
                                            const std::string& name) {
    return make_synthetic_domain(seed, params, name, fit_benchmark_backbone(seed, params));
}

LabeledImages load_train(const SyntheticBenchmark& b) {
    const LabeledImages parts[] = {load_images(b.real_train), load_images(b.fake_train)};
    return merge(parts);
}

LabeledImages load_test(const SyntheticBenchmark& b) {
    const LabeledImages parts[] = {load_images(b.real_test), load_images(b.fake_test)};
    return merge(parts);
}

}  // namespace robustdet
