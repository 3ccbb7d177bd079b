#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/core/image_io.hpp"
#include "robustdet/diffusion/dire.hpp"

#include <filesystem>
#include <vector>

namespace robustdet::cli {

inline constexpr double kNoiseFactor = 20.0;
inline constexpr double kDireDifferenceFactor = 10.0;
/// Gray level that zero perturbation renders at.
inline constexpr double kNoiseOffset = 0.5;

/// clip((x_adv - x) * factor + 0.5) for every sample, before quantization.
/// Throws ContractError on a shape mismatch.
Tensor amplified_noise(const Tensor& x, const Tensor& x_adv, double factor = kNoiseFactor);

/// clip(|d_clean - d_adv| * factor).
Tensor dire_difference(const Tensor& d_clean, const Tensor& d_adv, double factor = kDireDifferenceFactor);

/// Tiles images left to right with a one-pixel black gap. All tiles must
/// share height and channel count.
RawImage side_by_side(const std::vector<RawImage>& tiles);

/// Writes one panel per sample, named <stem>_<index>.png:
/// original | adversarial | amplified noise. Returns the written paths.
std::vector<std::filesystem::path> visualize_noise(const ImageTensor& x, const ImageTensor& x_adv,
                                                   const std::filesystem::path& directory, double factor = kNoiseFactor,
                                                   const std::string& stem = "noise");

/// Writes one panel per sample: clean DIRE | adversarial DIRE | amplified
/// difference. Maps are rendered as min(1, scale * residual).
std::vector<std::filesystem::path> visualize_dire_difference(const diffusion::DireMap& d_clean,
                                                             const diffusion::DireMap& d_adv,
                                                             const std::filesystem::path& directory,
                                                             double factor = kDireDifferenceFactor,
                                                             double scale = diffusion::kDefaultDireScale,
                                                             const std::string& stem = "dire_diff");

}  // namespace robustdet::cli
