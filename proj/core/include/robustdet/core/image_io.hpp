#pragma once

#include "robustdet/core/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace robustdet {

/// 8-bit interleaved (H, W, C) pixel buffer as read from or written to disk.
struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Decodes PNG/JPEG bytes. Alpha is dropped; colour images come back as RGB.
/// Throws IngestionError for undecodable input.
RawImage decode_image(std::span<const std::uint8_t> bytes);
RawImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RawImage& image);
std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality);
void write_png(const std::filesystem::path& path, const RawImage& image);

/// Quantizes sample `index` of a (N, C, H, W) tensor to 8 bits (values are
/// clamped to [0, 1] and rounded).
RawImage to_raw_image(const Tensor& images, std::size_t index);
/// (1, C, H, W) tensor scaled to [0, 1].
Tensor from_raw_image(const RawImage& image);

}  // namespace robustdet
