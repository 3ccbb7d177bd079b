#include "robustdet/core/dataset.hpp"

#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace robustdet {

namespace fs = std::filesystem;

std::string_view to_string(DatasetRole role) { return role == DatasetRole::kFake ? "fake" : "real"; }
std::string_view to_string(DatasetSplit split) { return split == DatasetSplit::kTest ? "test" : "train"; }

DatasetRole parse_role(std::string_view text) {
    if (text == "real") return DatasetRole::kReal;
    if (text == "fake") return DatasetRole::kFake;
    throw ConfigError("role", "expected real|fake, got '" + std::string(text) + "'");
}

DatasetSplit parse_split(std::string_view text) {
    if (text == "train") return DatasetSplit::kTrain;
    if (text == "test") return DatasetSplit::kTest;
    throw ConfigError("split", "expected train|test, got '" + std::string(text) + "'");
}

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IngestionError("dataset directory does not exist: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string synthetic_id(const SyntheticSource& src, std::size_t i) {
    return src.generator + ":" + std::to_string(src.seed) + ":" + std::to_string(src.first_index + i);
}

}  // namespace

std::vector<std::string> item_ids(const DatasetSpec& spec) {
    std::vector<std::string> ids;
    if (const auto* dir = std::get_if<DirectorySource>(&spec.source)) {
        for (const auto& p : list_images(dir->directory)) ids.push_back(fs::weakly_canonical(p).string());
    } else {
        const auto& syn = std::get<SyntheticSource>(spec.source);
        const std::size_t n = syn.images ? syn.images->size() : 0;
        for (std::size_t i = 0; i < n; ++i) ids.push_back(synthetic_id(syn, i));
    }
    return ids;
}

LabeledImages load_images(const DatasetSpec& spec) {
    spec.preprocess.validate();
    std::vector<Tensor> pixels;
    std::vector<std::string> ids;
    if (const auto* dir = std::get_if<DirectorySource>(&spec.source)) {
        for (const auto& p : list_images(dir->directory)) {
            pixels.push_back(preprocess(read_image(p), spec.preprocess).tensor());
            ids.push_back(fs::weakly_canonical(p).string());
        }
    } else {
        const auto& syn = std::get<SyntheticSource>(spec.source);
        if (syn.images) {
            for (std::size_t i = 0; i < syn.images->size(); ++i) {
                pixels.push_back(preprocess((*syn.images)[i], spec.preprocess).tensor());
                ids.push_back(synthetic_id(syn, i));
            }
        }
    }
    if (pixels.empty()) throw EmptyDatasetError("dataset '" + spec.name + "' has no images");

    const Tensor::Shape& first = pixels.front().shape();
    Tensor all({pixels.size(), first[1], first[2], first[3]});
    const std::size_t per = pixels.front().size();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        if (pixels[i].shape() != first) {
            throw DimensionError("dataset '" + spec.name + "' mixes channel counts: " + ids[i]);
        }
        std::copy(pixels[i].storage().begin(), pixels[i].storage().end(), all.storage().begin() + i * per);
    }

    LabeledImages out{ImageTensor(std::move(all)), LabelVector(ids.size(), spec.label()), std::move(ids), {}};
    out.origins.assign(out.size(), spec.name);
    return out;
}

LabeledImages LabeledImages::subset(std::span<const std::size_t> indices) const {
    LabeledImages out{images.gather(indices), {}, {}, {}};
    for (std::size_t i : indices) {
        out.labels.push_back(labels[i]);
        out.ids.push_back(ids[i]);
        out.origins.push_back(origins[i]);
    }
    return out;
}

LabeledImages merge(std::span<const LabeledImages> parts) {
    if (parts.empty()) throw EmptyDatasetError("merge: no datasets given");
    Tensor all = parts.front().images.tensor();
    LabeledImages out{{}, parts.front().labels, parts.front().ids, parts.front().origins};
    for (std::size_t p = 1; p < parts.size(); ++p) {
        all = concat_batch(all, parts[p].images.tensor());
        out.labels.insert(out.labels.end(), parts[p].labels.begin(), parts[p].labels.end());
        out.ids.insert(out.ids.end(), parts[p].ids.begin(), parts[p].ids.end());
        out.origins.insert(out.origins.end(), parts[p].origins.begin(), parts[p].origins.end());
    }
    out.images = ImageTensor(std::move(all));
    return out;
}

std::vector<Batch> make_batches(const LabeledImages& data, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
    if (batch_size == 0) throw ContractError("batch size must be positive");
    if (data.size() == 0) throw EmptyDatasetError("cannot batch an empty dataset");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(std::span<std::size_t>(order));
    }
    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
        Batch b{data.images.gather(idx), {}, idx};
        for (std::size_t i : idx) b.labels.push_back(data.labels[i]);
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<Batch> load_dataset(const DatasetSpec& spec, std::size_t batch_size, std::uint64_t seed) {
    return make_batches(load_images(spec), batch_size, seed);
}

void require_disjoint(const DatasetSpec& a, const DatasetSpec& b) {
    const auto ids_a = item_ids(a);
    const std::unordered_set<std::string> seen(ids_a.begin(), ids_a.end());
    for (const auto& id : item_ids(b)) {
        if (seen.contains(id)) {
            throw ProtocolError("datasets '" + a.name + "' and '" + b.name + "' share item " + id);
        }
    }
}

}  // namespace robustdet
