#pragma once

#include "robustdet/cli/config.hpp"
#include "robustdet/core/dataset.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace robustdet::cli {

std::string_view version();

/// File listing the datasets under a data root, written by gen-data:
/// {"datasets": [{"name": ..., "role": "real"|"fake"}]}. Split k of dataset
/// d lives in <root>/<d>/<k>/ as a flat folder of images.
inline constexpr const char* kDatasetIndexFile = "datasets.json";

struct DatasetEntry {
    std::string name;
    DatasetRole role = DatasetRole::kReal;
};

/// Throws IngestionError naming the path when the index is missing or bad.
std::vector<DatasetEntry> read_dataset_index(const std::filesystem::path& root);
void write_dataset_index(const std::filesystem::path& root, const std::vector<DatasetEntry>& entries);

/// Specs for `split` of the named datasets (all indexed datasets if `names`
/// is empty). Throws ConfigError naming the key for an unknown name.
std::vector<DatasetSpec> dataset_specs(const RunConfig& cfg, DatasetSplit split, const std::vector<std::string>& names,
                                       const char* key);

struct RunResult {
    int exit_code = 0;
    std::filesystem::path manifest;
    std::string error;
    /// Written artifacts other than the manifest.
    std::vector<std::filesystem::path> artifacts;
};

/// Runs one command. Always writes <output_dir>/manifest.json with the
/// config echo, seed, version, wall time and status. Module errors are
/// caught and reported through a nonzero exit code and the manifest.
RunResult run_command(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace robustdet::cli
