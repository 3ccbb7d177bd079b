#pragma once

#include "robustdet/advtrain/train.hpp"
#include "robustdet/core/synthetic.hpp"
#include "robustdet/eval/report.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace robustdet::cli {

enum class Command { kGenData, kTrain, kAttack, kDire, kEval, kViz };

std::string_view to_string(Command c);
Command parse_command(std::string_view text);

struct DatasetSection {
    std::filesystem::path root = "data";
    /// Dataset names (sub-directories of root). Empty means every dataset found.
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::vector<std::string> domains{"a", "b"};
    std::size_t image_size = 16;
    std::size_t channels = 1;
    std::size_t train_per_class = 750;
    std::size_t test_per_class = 250;
    double texture = 0.065;
    double fingerprint_amplitude = 0.015;
    int jpeg_quality = 95;

    friend bool operator==(const DatasetSection&, const DatasetSection&) = default;
};

struct ModelSection {
    std::string architecture = "small-conv";
    std::string input_space = "pixel";
    std::filesystem::path checkpoint;
    std::filesystem::path surrogate;

    friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct AttackSection {
    double epsilon = attack::kDefaultEpsilon;
    /// Unset means ε/4.
    std::optional<double> alpha;
    std::size_t steps = 10;
    /// Unset means on for training-time attacks and off for evaluation.
    std::optional<bool> random_init;
    std::string grad_mode = "identity-approximation";

    double step_size() const { return alpha.value_or(epsilon / 4.0); }
    attack::AttackConfig config(bool training, std::uint64_t seed) const;

    friend bool operator==(const AttackSection&, const AttackSection&) = default;
};

struct DiffusionSection {
    std::size_t steps = 20;
    std::size_t train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double dire_scale = 8.0;
    /// Unset means <dataset.root>/backbone.ckpt.
    std::filesystem::path checkpoint;

    friend bool operator==(const DiffusionSection&, const DiffusionSection&) = default;
};

struct TrainingSection {
    std::string mode = "standard";
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double lambda = 1.0;
    double learning_rate = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;

    friend bool operator==(const TrainingSection&, const TrainingSection&) = default;
};

struct EvaluationSection {
    std::string protocol = "all-set";
    /// method -> {"wo_at": checkpoint, "w_at": checkpoint}
    std::map<std::string, std::map<std::string, std::filesystem::path>> models;
    std::vector<std::string> training_datasets;
    std::size_t batch_size = 256;

    friend bool operator==(const EvaluationSection&, const EvaluationSection&) = default;
};

struct VizSection {
    std::string kind = "noise";
    /// Unset means 20 for noise panels and 10 for DIRE differences.
    std::optional<double> factor;
    std::size_t count = 8;

    double effective_factor() const { return factor.value_or(kind == "dire-diff" ? 10.0 : 20.0); }

    friend bool operator==(const VizSection&, const VizSection&) = default;
};

struct RunConfig {
    Command command = Command::kTrain;
    DatasetSection dataset;
    ModelSection model;
    AttackSection attack;
    DiffusionSection diffusion;
    TrainingSection training;
    EvaluationSection evaluation;
    VizSection viz;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs";

    advtrain::TrainConfig train_config() const;
    SyntheticParams synthetic_params() const;
    diffusion::DiffusionSchedule schedule() const;
    std::filesystem::path backbone_path() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Environment variable naming the output root; a flag still wins over it.
inline constexpr const char* kOutputDirEnv = "ROBUSTDET_OUTPUT_DIR";

/// One documented configuration leaf.
struct KeyInfo {
    std::string key;          ///< dotted name, e.g. "attack.epsilon"
    std::string alias;        ///< leaf name when unique across sections, else empty
    std::string description;
    std::string default_text;
};

/// The defaults table: every accepted key with its default.
const std::vector<KeyInfo>& config_keys();

/// Builds a validated RunConfig. Precedence: flag overrides, then the
/// environment, then the config file, then defaults. Overrides are
/// (dotted key or alias, text value) pairs. Throws ConfigError naming the
/// key on unknown keys, type mismatches and out-of-range values.
RunConfig parse_config(Command command, const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const std::map<std::string, std::string>& environment = {});

/// Same, from JSON text instead of a file.
RunConfig parse_config_text(Command command, const std::string& json_text,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {},
                            const std::map<std::string, std::string>& environment = {});

/// Canonical JSON for a config; parse_config_text of it gives back `cfg`.
std::string to_json_text(const RunConfig& cfg);

/// Range and enum checks shared by every entry point.
void validate(const RunConfig& cfg);

}  // namespace robustdet::cli
