#pragma once

#include "robustdet/core/image.hpp"
#include "robustdet/core/image_io.hpp"
#include "robustdet/core/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace robustdet {

enum class DatasetRole { kReal, kFake };
enum class DatasetSplit { kTrain, kTest };

std::string_view to_string(DatasetRole role);
std::string_view to_string(DatasetSplit split);
DatasetRole parse_role(std::string_view text);
DatasetSplit parse_split(std::string_view text);

/// Flat folder of PNG/JPEG files, read in lexicographic filename order.
struct DirectorySource {
    std::filesystem::path directory;
};

/// Images produced by the synthetic benchmark generator. `first_index` and
/// the image count identify the generator seed range the items came from.
struct SyntheticSource {
    std::string generator;
    std::uint64_t seed = 0;
    std::size_t first_index = 0;
    std::shared_ptr<const std::vector<RawImage>> images;
};

struct DatasetSpec {
    std::string name;
    DatasetRole role = DatasetRole::kReal;
    DatasetSplit split = DatasetSplit::kTrain;
    std::variant<DirectorySource, SyntheticSource> source;
    PreprocessConfig preprocess;

    int label() const { return role == DatasetRole::kFake ? 1 : 0; }
};

/// Every image of one or more datasets, preprocessed, with stable item ids.
struct LabeledImages {
    ImageTensor images;
    LabelVector labels;
    /// Item identity: "<dataset>/<file>" or "<generator>:<seed>:<index>".
    std::vector<std::string> ids;
    /// Dataset name per item.
    std::vector<std::string> origins;

    std::size_t size() const { return labels.size(); }
    LabeledImages subset(std::span<const std::size_t> indices) const;
};

struct Batch {
    ImageTensor images;
    LabelVector labels;
    /// Positions of the batch items inside the source LabeledImages.
    std::vector<std::size_t> indices;
};

/// Item identities of a spec without decoding pixels.
std::vector<std::string> item_ids(const DatasetSpec& spec);

/// Loads and preprocesses the whole dataset in deterministic order.
/// Throws EmptyDatasetError for an empty source and IngestionError when the
/// directory is missing or holds an undecodable file.
LabeledImages load_images(const DatasetSpec& spec);

/// Concatenates datasets; image shapes must agree.
LabeledImages merge(std::span<const LabeledImages> parts);

/// Splits into batches of `batch_size` (the last may be smaller). With a
/// shuffle seed the order is a seeded permutation, otherwise item order.
std::vector<Batch> make_batches(const LabeledImages& data, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// load_images followed by make_batches with a seeded shuffle.
std::vector<Batch> load_dataset(const DatasetSpec& spec, std::size_t batch_size, std::uint64_t seed);

/// Throws ProtocolError if the two specs share any item identity.
void require_disjoint(const DatasetSpec& a, const DatasetSpec& b);

}  // namespace robustdet
