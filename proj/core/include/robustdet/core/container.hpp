#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace robustdet {

/// Named float64 array stored in a container.
struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// Self-describing binary container used for detector and noise-predictor
/// checkpoints.
///
/// Layout: the 8-byte magic "ADVDCKPT", a little-endian uint32 header length,
/// a JSON header {version, kind, attributes, tensors: [{name, shape, offset}]}
/// and then raw little-endian float64 data.
struct Container {
    static constexpr int kVersion = 1;

    std::string kind;
    std::map<std::string, std::string> attributes;
    std::vector<NamedArray> arrays;

    const NamedArray& array(const std::string& name) const;
    const std::string& attribute(const std::string& key) const;

    friend bool operator==(const Container&, const Container&) = default;
};

std::vector<std::uint8_t> serialize(const Container& c);
/// Throws IngestionError for a malformed or unsupported container.
Container deserialize(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const Container& c);
/// Throws IngestionError naming the path if it cannot be read.
Container read_container(const std::filesystem::path& path);

/// Writes `bytes` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace robustdet
