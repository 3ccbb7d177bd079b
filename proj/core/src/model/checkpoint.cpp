#include "robustdet/model/checkpoint.hpp"

#include "robustdet/core/error.hpp"

namespace robustdet::model {

Container to_container(const DetectorModel& model) {
    Container c;
    c.kind = "detector";
    const DetectorSpec& s = model.spec();
    c.attributes = {{"architecture", std::string(to_string(s.architecture))},
                    {"input_space", std::string(to_string(s.input_space))},
                    {"channels", std::to_string(s.channels)},
                    {"height", std::to_string(s.height)},
                    {"width", std::to_string(s.width)}};
    const auto params = model.parameters();
    for (const auto& b : model.parameter_blocks()) {
        c.arrays.push_back({b.name, b.shape,
                            std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                                params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size))});
    }
    return c;
}

DetectorModel from_container(const Container& c) {
    if (c.kind != "detector") throw IngestionError("expected a detector checkpoint, found kind '" + c.kind + "'");
    DetectorSpec s;
    try {
        s.architecture = parse_architecture(c.attribute("architecture"));
        s.input_space = parse_input_space(c.attribute("input_space"));
        s.channels = std::stoul(c.attribute("channels"));
        s.height = std::stoul(c.attribute("height"));
        s.width = std::stoul(c.attribute("width"));
    } catch (const ConfigError& e) {
        throw IngestionError(std::string("detector checkpoint: ") + e.what());
    }
    const Network net = build_network(s);
    std::vector<double> params(net.parameter_count());
    for (const auto& b : net.parameter_blocks()) {
        const NamedArray& a = c.array(b.name);
        if (a.shape != b.shape) throw IngestionError("detector checkpoint: shape mismatch for '" + b.name + "'");
        std::copy(a.values.begin(), a.values.end(), params.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    return DetectorModel::from_parameters(s, std::move(params));
}

void save_detector(const std::filesystem::path& path, const DetectorModel& model) {
    write_container(path, to_container(model));
}

DetectorModel load_detector(const std::filesystem::path& path) {
    const Container c = read_container(path);
    try {
        return from_container(c);
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

}  // namespace robustdet::model
