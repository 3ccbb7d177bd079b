#include "robustdet/cli/config.hpp"

#include "robustdet/core/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace robustdet::cli {

using nlohmann::json;

std::string_view to_string(Command c) {
    switch (c) {
        case Command::kGenData: return "gen-data";
        case Command::kTrain: return "train";
        case Command::kAttack: return "attack";
        case Command::kDire: return "dire";
        case Command::kEval: return "eval";
        case Command::kViz: return "viz";
    }
    return "unknown";
}

Command parse_command(std::string_view text) {
    for (Command c : {Command::kGenData, Command::kTrain, Command::kAttack, Command::kDire, Command::kEval, Command::kViz}) {
        if (to_string(c) == text) return c;
    }
    throw ConfigError("command", "unknown command '" + std::string(text) + "'");
}

attack::AttackConfig AttackSection::config(bool training, std::uint64_t seed) const {
    attack::AttackConfig c;
    c.epsilon = epsilon;
    c.step_size = step_size();
    c.num_steps = steps;
    c.random_init = random_init.value_or(training);
    c.seed = seed;
    return c;
}

advtrain::TrainConfig RunConfig::train_config() const {
    advtrain::TrainConfig c;
    c.epochs = training.epochs;
    c.batch_size = training.batch_size;
    c.lambda = training.lambda;
    c.optimizer.learning_rate = training.learning_rate;
    c.optimizer.beta1 = training.beta1;
    c.optimizer.beta2 = training.beta2;
    c.seed = seed;
    return c;
}

SyntheticParams RunConfig::synthetic_params() const {
    SyntheticParams p;
    p.image_size = dataset.image_size;
    p.channels = dataset.channels;
    p.train_per_class = dataset.train_per_class;
    p.test_per_class = dataset.test_per_class;
    p.real.texture = dataset.texture;
    p.fingerprint_amplitude = dataset.fingerprint_amplitude;
    p.jpeg_quality = dataset.jpeg_quality;
    p.diffusion_steps = diffusion.steps;
    return p;
}

diffusion::DiffusionSchedule RunConfig::schedule() const {
    return diffusion::DiffusionSchedule::linear(diffusion.steps, diffusion.train_steps, diffusion.beta_start,
                                                diffusion.beta_end);
}

std::filesystem::path RunConfig::backbone_path() const {
    return diffusion.checkpoint.empty() ? dataset.root / "backbone.ckpt" : diffusion.checkpoint;
}

namespace {

enum class Kind { kNumber, kInteger, kString, kBool, kStringList, kOptNumber, kOptBool, kModels };

struct Schema {
    const char* key;
    Kind kind;
    const char* description;
};

const std::vector<Schema>& schema() {
    static const std::vector<Schema> s = {
        {"command", Kind::kString, "gen-data|train|attack|dire|eval|viz (set by the subcommand)"},
        {"seed", Kind::kInteger, "seed for every random choice of the run"},
        {"output_dir", Kind::kString, "directory receiving the manifest and artifacts"},
        {"dataset.root", Kind::kString, "directory holding one sub-directory per dataset"},
        {"dataset.train", Kind::kStringList, "dataset names used for training (empty: all)"},
        {"dataset.test", Kind::kStringList, "dataset names used for testing (empty: all)"},
        {"dataset.domains", Kind::kStringList, "domains written by gen-data"},
        {"dataset.image_size", Kind::kInteger, "side length of generated images and of the crop"},
        {"dataset.channels", Kind::kInteger, "1 (grayscale) or 3 (RGB)"},
        {"dataset.train_per_class", Kind::kInteger, "generated training images per class and domain"},
        {"dataset.test_per_class", Kind::kInteger, "generated test images per class and domain"},
        {"dataset.texture", Kind::kNumber, "texture noise level of the real family"},
        {"dataset.fingerprint_amplitude", Kind::kNumber, "amplitude of the generator fingerprint"},
        {"dataset.jpeg_quality", Kind::kInteger, "JPEG quality used by preprocessing"},
        {"model.architecture", Kind::kString, "small-conv|small-attention"},
        {"model.input_space", Kind::kString, "pixel|dire"},
        {"model.checkpoint", Kind::kString, "detector checkpoint to load"},
        {"model.surrogate", Kind::kString, "pixel-space detector for surrogate gradients"},
        {"attack.epsilon", Kind::kNumber, "L-infinity radius in [0, 1)"},
        {"attack.alpha", Kind::kOptNumber, "PGD step size (default epsilon/4)"},
        {"attack.steps", Kind::kInteger, "PGD iterations"},
        {"attack.random_init", Kind::kOptBool, "uniform random start (default: on in training, off otherwise)"},
        {"attack.grad_mode", Kind::kString, "identity-approximation|surrogate"},
        {"diffusion.steps", Kind::kInteger, "DDIM steps for inversion and reconstruction"},
        {"diffusion.train_steps", Kind::kInteger, "length of the underlying linear-beta schedule"},
        {"diffusion.beta_start", Kind::kNumber, "first beta of the training schedule"},
        {"diffusion.beta_end", Kind::kNumber, "last beta of the training schedule"},
        {"diffusion.dire_scale", Kind::kNumber, "factor applied to DIRE maps before clamping to [0, 1]"},
        {"diffusion.checkpoint", Kind::kString, "noise-predictor checkpoint (default <dataset.root>/backbone.ckpt)"},
        {"training.mode", Kind::kString, "standard|at|at-dire"},
        {"training.epochs", Kind::kInteger, "training epochs"},
        {"training.batch_size", Kind::kInteger, "mini-batch size"},
        {"training.lambda", Kind::kNumber, "weight of the adversarial loss"},
        {"training.learning_rate", Kind::kNumber, "Adam learning rate"},
        {"training.beta1", Kind::kNumber, "Adam beta1"},
        {"training.beta2", Kind::kNumber, "Adam beta2"},
        {"evaluation.protocol", Kind::kString, "all-set|cross-domain"},
        {"evaluation.models", Kind::kModels, "{method: {wo_at: checkpoint, w_at: checkpoint}}"},
        {"evaluation.training_datasets", Kind::kStringList, "cross-domain: datasets seen in training"},
        {"evaluation.batch_size", Kind::kInteger, "evaluation batch size"},
        {"viz.kind", Kind::kString, "noise|dire-diff"},
        {"viz.factor", Kind::kOptNumber, "amplification (default 20 for noise, 10 for dire-diff)"},
        {"viz.count", Kind::kInteger, "number of panels"},
    };
    return s;
}

const Schema* find_schema(const std::string& key) {
    for (const auto& s : schema()) {
        if (key == s.key) return &s;
    }
    return nullptr;
}

std::string leaf(const std::string& key) {
    const auto dot = key.rfind('.');
    return dot == std::string::npos ? key : key.substr(dot + 1);
}

json to_json(const RunConfig& c) {
    auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
    json models = json::object();
    for (const auto& [method, settings] : c.evaluation.models) {
        for (const auto& [setting, path] : settings) models[method][setting] = path.string();
    }
    return json{
        {"command", std::string(to_string(c.command))},
        {"seed", c.seed},
        {"output_dir", c.output_dir.string()},
        {"dataset",
         {{"root", c.dataset.root.string()},
          {"train", c.dataset.train},
          {"test", c.dataset.test},
          {"domains", c.dataset.domains},
          {"image_size", c.dataset.image_size},
          {"channels", c.dataset.channels},
          {"train_per_class", c.dataset.train_per_class},
          {"test_per_class", c.dataset.test_per_class},
          {"texture", c.dataset.texture},
          {"fingerprint_amplitude", c.dataset.fingerprint_amplitude},
          {"jpeg_quality", c.dataset.jpeg_quality}}},
        {"model",
         {{"architecture", c.model.architecture},
          {"input_space", c.model.input_space},
          {"checkpoint", c.model.checkpoint.string()},
          {"surrogate", c.model.surrogate.string()}}},
        {"attack",
         {{"epsilon", c.attack.epsilon},
          {"alpha", opt(c.attack.alpha)},
          {"steps", c.attack.steps},
          {"random_init", opt(c.attack.random_init)},
          {"grad_mode", c.attack.grad_mode}}},
        {"diffusion",
         {{"steps", c.diffusion.steps},
          {"train_steps", c.diffusion.train_steps},
          {"beta_start", c.diffusion.beta_start},
          {"beta_end", c.diffusion.beta_end},
          {"dire_scale", c.diffusion.dire_scale},
          {"checkpoint", c.diffusion.checkpoint.string()}}},
        {"training",
         {{"mode", c.training.mode},
          {"epochs", c.training.epochs},
          {"batch_size", c.training.batch_size},
          {"lambda", c.training.lambda},
          {"learning_rate", c.training.learning_rate},
          {"beta1", c.training.beta1},
          {"beta2", c.training.beta2}}},
        {"evaluation",
         {{"protocol", c.evaluation.protocol},
          {"models", models},
          {"training_datasets", c.evaluation.training_datasets},
          {"batch_size", c.evaluation.batch_size}}},
        {"viz", {{"kind", c.viz.kind}, {"factor", opt(c.viz.factor)}, {"count", c.viz.count}}},
    };
}

// Checks one value against its schema entry; throws naming the key.
void check_type(const std::string& key, Kind kind, const json& v) {
    auto fail = [&](const char* what) { throw ConfigError(key, std::string("expected ") + what); };
    switch (kind) {
        case Kind::kNumber:
            if (!v.is_number()) fail("a number");
            break;
        case Kind::kInteger:
            if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
                fail("an integer");
            }
            if (v.get<double>() < 0) throw ConfigError(key, "must be >= 0");
            break;
        case Kind::kString:
            if (!v.is_string()) fail("a string");
            break;
        case Kind::kBool:
            if (!v.is_boolean()) fail("true or false");
            break;
        case Kind::kStringList:
            if (!v.is_array()) fail("a list of strings");
            for (const auto& e : v) {
                if (!e.is_string()) fail("a list of strings");
            }
            break;
        case Kind::kOptNumber:
            if (!v.is_null() && !v.is_number()) fail("a number or null");
            break;
        case Kind::kOptBool:
            if (!v.is_null() && !v.is_boolean()) fail("true, false or null");
            break;
        case Kind::kModels:
            if (!v.is_object()) fail("an object {method: {wo_at|w_at: path}}");
            for (const auto& [method, settings] : v.items()) {
                if (!settings.is_object()) fail("an object {method: {wo_at|w_at: path}}");
                for (const auto& [setting, path] : settings.items()) {
                    if (setting != "wo_at" && setting != "w_at") {
                        throw ConfigError(key + "." + method + "." + setting, "unknown setting (expected wo_at|w_at)");
                    }
                    if (!path.is_string()) fail("checkpoint paths as strings");
                }
            }
            break;
    }
}

// Overlays `src` onto `dst`, rejecting keys that are not in the schema.
void merge_checked(json& dst, const json& src, const std::string& prefix) {
    if (!src.is_object()) throw ConfigError(prefix, "expected an object");
    for (const auto& [k, v] : src.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (const Schema* s = find_schema(key)) {
            check_type(key, s->kind, v);
            dst[k] = v;
        } else if (dst.contains(k) && dst[k].is_object()) {
            merge_checked(dst[k], v, key);
        } else {
            throw ConfigError(key, "unknown configuration key");
        }
    }
}

json& slot(json& root, const std::string& key) {
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        node = &(*node)[part];
        if (dot == std::string::npos) return *node;
        start = dot + 1;
    }
}

std::string resolve_key(const std::string& name) {
    if (find_schema(name)) return name;
    std::string found;
    for (const auto& s : schema()) {
        if (leaf(s.key) == name) {
            if (!found.empty()) throw ConfigError(name, "ambiguous flag; use the dotted name");
            found = s.key;
        }
    }
    if (found.empty()) throw ConfigError(name, "unknown configuration key");
    return found;
}

json parse_flag_value(const std::string& key, Kind kind, const std::string& text) {
    try {
        switch (kind) {
            case Kind::kString: return text;
            case Kind::kStringList: {
                if (!text.empty() && text.front() == '[') return json::parse(text);
                json list = json::array();
                std::size_t start = 0;
                while (start <= text.size() && !text.empty()) {
                    const auto comma = text.find(',', start);
                    list.push_back(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
                return list;
            }
            case Kind::kOptBool:
            case Kind::kBool:
                if (text == "true" || text == "1") return true;
                if (text == "false" || text == "0") return false;
                if (text == "null" && kind == Kind::kOptBool) return nullptr;
                throw ConfigError(key, "expected true or false, got '" + text + "'");
            default: return json::parse(text);
        }
    } catch (const json::exception&) {
        throw ConfigError(key, "cannot parse value '" + text + "'");
    }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
    return j.at(section).at(key).get<T>();
}

RunConfig from_json(const json& j) {
    RunConfig c;
    c.command = parse_command(j.at("command").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();

    c.dataset.root = get<std::string>(j, "dataset", "root");
    c.dataset.train = get<std::vector<std::string>>(j, "dataset", "train");
    c.dataset.test = get<std::vector<std::string>>(j, "dataset", "test");
    c.dataset.domains = get<std::vector<std::string>>(j, "dataset", "domains");
    c.dataset.image_size = static_cast<std::size_t>(get<double>(j, "dataset", "image_size"));
    c.dataset.channels = static_cast<std::size_t>(get<double>(j, "dataset", "channels"));
    c.dataset.train_per_class = static_cast<std::size_t>(get<double>(j, "dataset", "train_per_class"));
    c.dataset.test_per_class = static_cast<std::size_t>(get<double>(j, "dataset", "test_per_class"));
    c.dataset.texture = get<double>(j, "dataset", "texture");
    c.dataset.fingerprint_amplitude = get<double>(j, "dataset", "fingerprint_amplitude");
    c.dataset.jpeg_quality = static_cast<int>(get<double>(j, "dataset", "jpeg_quality"));

    c.model.architecture = get<std::string>(j, "model", "architecture");
    c.model.input_space = get<std::string>(j, "model", "input_space");
    c.model.checkpoint = get<std::string>(j, "model", "checkpoint");
    c.model.surrogate = get<std::string>(j, "model", "surrogate");

    const json& a = j.at("attack");
    c.attack.epsilon = a.at("epsilon").get<double>();
    if (!a.at("alpha").is_null()) c.attack.alpha = a.at("alpha").get<double>();
    c.attack.steps = static_cast<std::size_t>(a.at("steps").get<double>());
    if (!a.at("random_init").is_null()) c.attack.random_init = a.at("random_init").get<bool>();
    c.attack.grad_mode = a.at("grad_mode").get<std::string>();

    c.diffusion.steps = static_cast<std::size_t>(get<double>(j, "diffusion", "steps"));
    c.diffusion.train_steps = static_cast<std::size_t>(get<double>(j, "diffusion", "train_steps"));
    c.diffusion.beta_start = get<double>(j, "diffusion", "beta_start");
    c.diffusion.beta_end = get<double>(j, "diffusion", "beta_end");
    c.diffusion.dire_scale = get<double>(j, "diffusion", "dire_scale");
    c.diffusion.checkpoint = get<std::string>(j, "diffusion", "checkpoint");

    c.training.mode = get<std::string>(j, "training", "mode");
    c.training.epochs = static_cast<std::size_t>(get<double>(j, "training", "epochs"));
    c.training.batch_size = static_cast<std::size_t>(get<double>(j, "training", "batch_size"));
    c.training.lambda = get<double>(j, "training", "lambda");
    c.training.learning_rate = get<double>(j, "training", "learning_rate");
    c.training.beta1 = get<double>(j, "training", "beta1");
    c.training.beta2 = get<double>(j, "training", "beta2");

    c.evaluation.protocol = get<std::string>(j, "evaluation", "protocol");
    for (const auto& [method, settings] : j.at("evaluation").at("models").items()) {
        for (const auto& [setting, path] : settings.items()) c.evaluation.models[method][setting] = path.get<std::string>();
    }
    c.evaluation.training_datasets = get<std::vector<std::string>>(j, "evaluation", "training_datasets");
    c.evaluation.batch_size = static_cast<std::size_t>(get<double>(j, "evaluation", "batch_size"));

    c.viz.kind = get<std::string>(j, "viz", "kind");
    if (!j.at("viz").at("factor").is_null()) c.viz.factor = j.at("viz").at("factor").get<double>();
    c.viz.count = static_cast<std::size_t>(get<double>(j, "viz", "count"));
    return c;
}

RunConfig build(Command command, const json& file, const std::vector<std::pair<std::string, std::string>>& overrides,
                const std::map<std::string, std::string>& environment) {
    json j = to_json(RunConfig{});
    merge_checked(j, file, "");
    if (const auto it = environment.find(kOutputDirEnv); it != environment.end() && !it->second.empty()) {
        j["output_dir"] = it->second;
    }
    for (const auto& [name, text] : overrides) {
        const std::string key = resolve_key(name);
        const Schema* s = find_schema(key);
        json v = parse_flag_value(key, s->kind, text);
        check_type(key, s->kind, v);
        slot(j, key) = std::move(v);
    }
    j["command"] = std::string(to_string(command));
    RunConfig cfg = from_json(j);
    validate(cfg);
    return cfg;
}

}  // namespace

const std::vector<KeyInfo>& config_keys() {
    static const std::vector<KeyInfo> keys = [] {
        const json defaults = to_json(RunConfig{});
        std::vector<KeyInfo> out;
        for (const auto& s : schema()) {
            std::string alias = leaf(s.key);
            for (const auto& other : schema()) {
                if (other.key != std::string(s.key) && leaf(other.key) == alias) alias.clear();
            }
            if (alias == s.key) alias.clear();
            json v = defaults;
            std::string key = s.key;
            std::size_t start = 0;
            while (true) {
                const auto dot = key.find('.', start);
                v = v.at(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
                if (dot == std::string::npos) break;
                start = dot + 1;
            }
            out.push_back({s.key, alias, s.description, v.dump()});
        }
        return out;
    }();
    return keys;
}

void validate(const RunConfig& c) {
    auto range = [](bool ok, const char* key, const char* msg) {
        if (!ok) throw ConfigError(key, msg);
    };
    range(c.attack.epsilon >= 0.0 && c.attack.epsilon < 1.0, "attack.epsilon", "must be in [0, 1)");
    range(!c.attack.alpha || *c.attack.alpha >= 0.0, "attack.alpha", "must be >= 0");
    range(c.attack.steps >= 1, "attack.steps", "must be >= 1");
    attack::parse_grad_mode(c.attack.grad_mode);
    model::parse_architecture(c.model.architecture);
    model::parse_input_space(c.model.input_space);
    range(c.dataset.image_size >= 8, "dataset.image_size", "must be >= 8");
    range(c.dataset.channels == 1 || c.dataset.channels == 3, "dataset.channels", "must be 1 or 3");
    range(c.dataset.train_per_class >= 1, "dataset.train_per_class", "must be >= 1");
    range(c.dataset.test_per_class >= 1, "dataset.test_per_class", "must be >= 1");
    range(c.dataset.texture >= 0.0, "dataset.texture", "must be >= 0");
    range(c.dataset.fingerprint_amplitude >= 0.0, "dataset.fingerprint_amplitude", "must be >= 0");
    range(c.dataset.jpeg_quality >= 1 && c.dataset.jpeg_quality <= 100, "dataset.jpeg_quality", "must be in [1, 100]");
    range(!c.dataset.domains.empty(), "dataset.domains", "must name at least one domain");
    range(c.diffusion.steps >= 1 && c.diffusion.steps <= c.diffusion.train_steps, "diffusion.steps",
          "must be in [1, diffusion.train_steps]");
    range(c.diffusion.beta_start > 0.0 && c.diffusion.beta_start <= c.diffusion.beta_end, "diffusion.beta_start",
          "must be in (0, beta_end]");
    range(c.diffusion.beta_end < 1.0, "diffusion.beta_end", "must be < 1");
    range(c.diffusion.dire_scale > 0.0, "diffusion.dire_scale", "must be > 0");
    range(c.training.mode == "standard" || c.training.mode == "at" || c.training.mode == "at-dire", "training.mode",
          "expected standard|at|at-dire");
    range(c.training.epochs >= 1, "training.epochs", "must be >= 1");
    range(c.training.batch_size >= 1, "training.batch_size", "must be >= 1");
    range(c.training.lambda >= 0.0, "training.lambda", "must be >= 0");
    range(c.training.learning_rate > 0.0, "training.learning_rate", "must be > 0");
    range(c.training.beta1 >= 0.0 && c.training.beta1 < 1.0, "training.beta1", "must be in [0, 1)");
    range(c.training.beta2 >= 0.0 && c.training.beta2 < 1.0, "training.beta2", "must be in [0, 1)");
    eval::parse_protocol(c.evaluation.protocol);
    range(c.evaluation.batch_size >= 1, "evaluation.batch_size", "must be >= 1");
    range(c.viz.kind == "noise" || c.viz.kind == "dire-diff", "viz.kind", "expected noise|dire-diff");
    range(!c.viz.factor || *c.viz.factor > 0.0, "viz.factor", "must be > 0");
    range(c.viz.count >= 1, "viz.count", "must be >= 1");
}

RunConfig parse_config_text(Command command, const std::string& json_text,
                            const std::vector<std::pair<std::string, std::string>>& overrides,
                            const std::map<std::string, std::string>& environment) {
    json file = json::object();
    if (!json_text.empty()) {
        try {
            file = json::parse(json_text);
        } catch (const json::exception& e) {
            throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
        }
    }
    return build(command, file, overrides, environment);
}

RunConfig parse_config(Command command, const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const std::map<std::string, std::string>& environment) {
    std::string text;
    if (file) {
        try {
            text = read_text(*file);
        } catch (const IngestionError&) {
            throw ConfigError("config", "cannot read config file " + file->string());
        }
    }
    return parse_config_text(command, text, overrides, environment);
}

std::string to_json_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace robustdet::cli
