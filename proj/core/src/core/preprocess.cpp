#include "robustdet/core/preprocess.hpp"

#include "robustdet/core/error.hpp"

#include <string>

namespace robustdet {

void PreprocessConfig::validate() const {
    if (jpeg_quality < 1 || jpeg_quality > 100) throw ConfigError("jpeg_quality", "must be in [1, 100]");
    if (crop_size < 8) throw ConfigError("crop_size", "must be >= 8");
}

ImageTensor preprocess(const RawImage& raw, const PreprocessConfig& cfg) {
    cfg.validate();
    if (raw.height < cfg.crop_size || raw.width < cfg.crop_size) {
        throw DimensionError("image " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                             " is smaller than crop size " + std::to_string(cfg.crop_size));
    }
    const RawImage recompressed = decode_image(encode_jpeg(raw, cfg.jpeg_quality));
    const std::size_t top = (recompressed.height - cfg.crop_size) / 2;
    const std::size_t left = (recompressed.width - cfg.crop_size) / 2;

    Tensor out({1, recompressed.channels, cfg.crop_size, cfg.crop_size});
    for (std::size_t c = 0; c < recompressed.channels; ++c) {
        for (std::size_t h = 0; h < cfg.crop_size; ++h) {
            for (std::size_t w = 0; w < cfg.crop_size; ++w) {
                const std::size_t src = ((top + h) * recompressed.width + (left + w)) * recompressed.channels + c;
                out.at(0, c, h, w) = recompressed.pixels[src] / 255.0;
            }
        }
    }
    return ImageTensor(std::move(out));
}

ImageTensor preprocess_bytes(std::span<const std::uint8_t> bytes, const PreprocessConfig& cfg) {
    return preprocess(decode_image(bytes), cfg);
}

}  // namespace robustdet
