#include "robustdet/core/image_io.hpp"

#include "robustdet/core/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace robustdet {

namespace {

cv::Mat to_mat(const RawImage& image) {
    if (image.channels != 1 && image.channels != 3) throw ContractError("raw image must have 1 or 3 channels");
    if (image.pixels.size() != image.height * image.width * image.channels) {
        throw ContractError("raw image buffer size does not match its dimensions");
    }
    const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
    cv::Mat mat(static_cast<int>(image.height), static_cast<int>(image.width), type);
    std::copy(image.pixels.begin(), image.pixels.end(), mat.data);
    if (image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    return mat;
}

RawImage from_mat(cv::Mat mat) {
    if (mat.depth() != CV_8U) mat.convertTo(mat, CV_8U);
    if (mat.channels() == 4) {
        cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
    }
    if (mat.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
    if (!mat.isContinuous()) mat = mat.clone();
    RawImage out;
    out.height = static_cast<std::size_t>(mat.rows);
    out.width = static_cast<std::size_t>(mat.cols);
    out.channels = static_cast<std::size_t>(mat.channels());
    out.pixels.assign(mat.data, mat.data + out.height * out.width * out.channels);
    return out;
}

std::vector<std::uint8_t> encode(const RawImage& image, const char* ext, const std::vector<int>& params) {
    std::vector<std::uint8_t> bytes;
    if (!cv::imencode(ext, to_mat(image), bytes, params)) {
        throw Error(std::string("failed to encode image as ") + ext);
    }
    return bytes;
}

}  // namespace

RawImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw IngestionError("cannot decode an empty image buffer");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat;
    try {
        mat = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw IngestionError(std::string("image decode failed: ") + e.what());
    }
    if (mat.empty()) throw IngestionError("image bytes are not a decodable PNG/JPEG");
    return from_mat(std::move(mat));
}

RawImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open image file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RawImage& image) {
    return encode(image, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality) {
    return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

void write_png(const std::filesystem::path& path, const RawImage& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RawImage to_raw_image(const Tensor& images, std::size_t index) {
    if (images.rank() != 4) throw ContractError("to_raw_image expects a (N, C, H, W) tensor");
    RawImage out;
    out.channels = images.dim(1);
    out.height = images.dim(2);
    out.width = images.dim(3);
    out.pixels.resize(out.height * out.width * out.channels);
    for (std::size_t c = 0; c < out.channels; ++c) {
        for (std::size_t h = 0; h < out.height; ++h) {
            for (std::size_t w = 0; w < out.width; ++w) {
                const double v = std::clamp(images.at(index, c, h, w), 0.0, 1.0);
                out.pixels[(h * out.width + w) * out.channels + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return out;
}

Tensor from_raw_image(const RawImage& image) {
    Tensor out({1, image.channels, image.height, image.width});
    for (std::size_t c = 0; c < image.channels; ++c) {
        for (std::size_t h = 0; h < image.height; ++h) {
            for (std::size_t w = 0; w < image.width; ++w) {
                out.at(0, c, h, w) = image.pixels[(h * image.width + w) * image.channels + c] / 255.0;
            }
        }
    }
    return out;
}

}  // namespace robustdet
