#include "robustdet/core/container.hpp"

#include "robustdet/core/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace robustdet {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

}  // namespace

const NamedArray& Container::array(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw IngestionError("container has no array named '" + name + "'");
}

const std::string& Container::attribute(const std::string& key) const {
    const auto it = attributes.find(key);
    if (it == attributes.end()) throw IngestionError("container has no attribute '" + key + "'");
    return it->second;
}

std::vector<std::uint8_t> serialize(const Container& c) {
    nlohmann::json header;
    header["version"] = Container::kVersion;
    header["kind"] = c.kind;
    header["attributes"] = c.attributes;
    header["tensors"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& a : c.arrays) {
        const std::size_t expected =
            std::accumulate(a.shape.begin(), a.shape.end(), std::size_t{1}, std::multiplies<>());
        if (expected != a.values.size()) throw ContractError("container array '" + a.name + "' has inconsistent shape");
        header["tensors"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
        offset += a.values.size();
    }
    const std::string text = header.dump();
    const auto len = static_cast<std::uint32_t>(text.size());

    std::vector<std::uint8_t> out(sizeof kMagic + sizeof len + text.size() + offset * sizeof(double));
    std::uint8_t* p = out.data();
    std::memcpy(p, kMagic, sizeof kMagic);
    p += sizeof kMagic;
    std::memcpy(p, &len, sizeof len);
    p += sizeof len;
    std::memcpy(p, text.data(), text.size());
    p += text.size();
    for (const auto& a : c.arrays) {
        std::memcpy(p, a.values.data(), a.values.size() * sizeof(double));
        p += a.values.size() * sizeof(double);
    }
    return out;
}

Container deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw IngestionError("not a checkpoint container (bad magic)");
    }
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
    const std::size_t data_start = sizeof kMagic + sizeof len + len;
    if (bytes.size() < data_start) throw IngestionError("checkpoint container truncated in header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + sizeof kMagic + sizeof len, bytes.begin() + data_start);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!header.contains("version")) throw IngestionError("checkpoint header lacks a version field");
    if (header["version"].get<int>() != Container::kVersion) {
        throw IngestionError("unsupported checkpoint version " + header["version"].dump());
    }

    Container c;
    try {
        c.kind = header.at("kind").get<std::string>();
        c.attributes = header.at("attributes").get<std::map<std::string, std::string>>();
        const std::size_t count = (bytes.size() - data_start) / sizeof(double);
        for (const auto& t : header.at("tensors")) {
            NamedArray a;
            a.name = t.at("name").get<std::string>();
            a.shape = t.at("shape").get<std::vector<std::size_t>>();
            const auto offset = t.at("offset").get<std::size_t>();
            const std::size_t n = std::accumulate(a.shape.begin(), a.shape.end(), std::size_t{1}, std::multiplies<>());
            if (offset + n > count) throw IngestionError("checkpoint array '" + a.name + "' exceeds the data section");
            a.values.resize(n);
            std::memcpy(a.values.data(), bytes.data() + data_start + offset * sizeof(double), n * sizeof(double));
            c.arrays.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(std::string("malformed checkpoint header: ") + e.what());
    }
    return c;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot read file: " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_container(const std::filesystem::path& path, const Container& c) { write_file(path, serialize(c)); }

Container read_container(const std::filesystem::path& path) {
    try {
        return deserialize(read_file(path));
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

}  // namespace robustdet
