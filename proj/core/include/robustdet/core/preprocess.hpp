#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/core/image_io.hpp"

namespace robustdet {

struct PreprocessConfig {
    int jpeg_quality = 95;
    std::size_t crop_size = 16;

    /// Throws ConfigError on an out-of-range quality or zero crop.
    void validate() const;
    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// JPEG re-encode at cfg.jpeg_quality, center crop to crop_size x crop_size,
/// scale to [0, 1]. Returns a (1, C, crop, crop) batch.
///
/// Throws DimensionError when the image is smaller than the crop.
ImageTensor preprocess(const RawImage& raw, const PreprocessConfig& cfg);

/// Decodes then preprocesses; undecodable bytes raise IngestionError.
ImageTensor preprocess_bytes(std::span<const std::uint8_t> bytes, const PreprocessConfig& cfg);

}  // namespace robustdet
