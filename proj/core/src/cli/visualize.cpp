#include "robustdet/cli/visualize.hpp"

#include "robustdet/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace robustdet::cli {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_images(const Tensor& a, const Tensor& b, const char* context) {
    require_same_shape(a, b, context);
    if (a.rank() != 4) throw ContractError(std::string(context) + ": expected an (N, C, H, W) batch");
}

std::filesystem::path panel_path(const std::filesystem::path& dir, const std::string& stem, std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof(name), "_%04zu.png", i);
    return dir / (stem + name);
}

}  // namespace

Tensor amplified_noise(const Tensor& x, const Tensor& x_adv, double factor) {
    require_images(x, x_adv, "visualize_noise");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = clip01((x_adv[i] - x[i]) * factor + kNoiseOffset);
    return out;
}

Tensor dire_difference(const Tensor& d_clean, const Tensor& d_adv, double factor) {
    require_images(d_clean, d_adv, "visualize_dire_difference");
    Tensor out(d_clean.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clip01(std::abs(d_clean[i] - d_adv[i]) * factor);
    return out;
}

RawImage side_by_side(const std::vector<RawImage>& tiles) {
    if (tiles.empty()) throw ContractError("side_by_side: no tiles");
    const std::size_t h = tiles.front().height, c = tiles.front().channels;
    std::size_t w = 0;
    for (const auto& t : tiles) {
        if (t.height != h || t.channels != c) throw ContractError("side_by_side: tiles differ in height or channels");
        w += t.width;
    }
    w += tiles.size() - 1;
    RawImage out{h, w, c, std::vector<std::uint8_t>(h * w * c, 0)};
    std::size_t x0 = 0;
    for (const auto& t : tiles) {
        for (std::size_t y = 0; y < h; ++y) {
            std::copy_n(t.pixels.begin() + static_cast<std::ptrdiff_t>(y * t.width * c), t.width * c,
                        out.pixels.begin() + static_cast<std::ptrdiff_t>((y * w + x0) * c));
        }
        x0 += t.width + 1;
    }
    return out;
}

std::vector<std::filesystem::path> visualize_noise(const ImageTensor& x, const ImageTensor& x_adv,
                                                   const std::filesystem::path& directory, double factor,
                                                   const std::string& stem) {
    const Tensor noise = amplified_noise(x, x_adv, factor);
    std::filesystem::create_directories(directory);
    std::vector<std::filesystem::path> written;
    for (std::size_t i = 0; i < x.batch(); ++i) {
        const auto path = panel_path(directory, stem, i);
        write_png(path, side_by_side({to_raw_image(x, i), to_raw_image(x_adv, i), to_raw_image(noise, i)}));
        written.push_back(path);
    }
    return written;
}

std::vector<std::filesystem::path> visualize_dire_difference(const diffusion::DireMap& d_clean,
                                                             const diffusion::DireMap& d_adv,
                                                             const std::filesystem::path& directory, double factor,
                                                             double scale, const std::string& stem) {
    const Tensor diff = dire_difference(d_clean.residual, d_adv.residual, factor);
    auto render = [scale](const Tensor& r) {
        Tensor t(r.shape());
        for (std::size_t i = 0; i < r.size(); ++i) t[i] = clip01(scale * r[i]);
        return t;
    };
    const Tensor clean = render(d_clean.residual), adv = render(d_adv.residual);
    std::filesystem::create_directories(directory);
    std::vector<std::filesystem::path> written;
    for (std::size_t i = 0; i < diff.batch(); ++i) {
        const auto path = panel_path(directory, stem, i);
        write_png(path, side_by_side({to_raw_image(clean, i), to_raw_image(adv, i), to_raw_image(diff, i)}));
        written.push_back(path);
    }
    return written;
}

}  // namespace robustdet::cli
