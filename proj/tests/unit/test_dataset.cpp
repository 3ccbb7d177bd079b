#include "robustdet/core/dataset.hpp"
#include "robustdet/core/error.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace robustdet;
using robustdet::testing::TempDir;

namespace {

void write_images(const std::filesystem::path& dir, std::size_t count, std::size_t size = 12) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < count; ++i) {
        RawImage img{size, size, 1, std::vector<std::uint8_t>(size * size, static_cast<std::uint8_t>(10 * i))};
        write_png(dir / ("img" + std::to_string(100 + i) + ".png"), img);
    }
}

DatasetSpec dir_spec(const std::string& name, const std::filesystem::path& dir, DatasetRole role,
                     DatasetSplit split = DatasetSplit::kTrain) {
    DatasetSpec s;
    s.name = name;
    s.role = role;
    s.split = split;
    s.source = DirectorySource{dir};
    s.preprocess = {95, 12};
    return s;
}

}  // namespace

TEST(Dataset, BatchSizesFollowArithmetic) {
    TempDir tmp("batches");
    write_images(tmp.path() / "d", 10);
    const auto batches = load_dataset(dir_spec("d", tmp.path() / "d", DatasetRole::kReal), 4, 0);
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].labels.size(), 4u);
    EXPECT_EQ(batches[1].labels.size(), 4u);
    EXPECT_EQ(batches[2].labels.size(), 2u);
}

TEST(Dataset, LabelsFollowRole) {
    TempDir tmp("roles");
    write_images(tmp.path() / "d", 5);
    const LabeledImages fake = load_images(dir_spec("d", tmp.path() / "d", DatasetRole::kFake));
    EXPECT_EQ(fake.labels, LabelVector(5, 1));
    const LabeledImages real = load_images(dir_spec("d", tmp.path() / "d", DatasetRole::kReal));
    EXPECT_EQ(real.labels, LabelVector(5, 0));
    EXPECT_EQ(real.origins, std::vector<std::string>(5, "d"));
}

TEST(Dataset, SeededOrderIsReproducible) {
    TempDir tmp("order");
    write_images(tmp.path() / "d", 9);
    const auto spec = dir_spec("d", tmp.path() / "d", DatasetRole::kReal);
    const auto a = load_dataset(spec, 3, 11), b = load_dataset(spec, 3, 11), c = load_dataset(spec, 3, 12);
    std::vector<std::size_t> ia, ib, ic;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ia.insert(ia.end(), a[k].indices.begin(), a[k].indices.end());
        ib.insert(ib.end(), b[k].indices.begin(), b[k].indices.end());
        ic.insert(ic.end(), c[k].indices.begin(), c[k].indices.end());
        EXPECT_EQ(a[k].images, b[k].images);
    }
    EXPECT_EQ(ia, ib);
    EXPECT_NE(ia, ic);
}

TEST(Dataset, FilesReadInLexicographicOrder) {
    TempDir tmp("lex");
    write_images(tmp.path() / "d", 3);
    const auto ids = item_ids(dir_spec("d", tmp.path() / "d", DatasetRole::kReal));
    ASSERT_EQ(ids.size(), 3u);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(Dataset, EmptyAndMissingSources) {
    TempDir tmp("empty");
    std::filesystem::create_directories(tmp.path() / "empty");
    EXPECT_THROW(load_images(dir_spec("e", tmp.path() / "empty", DatasetRole::kReal)), EmptyDatasetError);
    EXPECT_THROW(load_images(dir_spec("m", tmp.path() / "missing", DatasetRole::kReal)), IngestionError);
}

TEST(Dataset, UndecodableFileIsAnIngestionError) {
    TempDir tmp("junk");
    write_images(tmp.path() / "d", 2);
    write_text(tmp.path() / "d" / "zzz.png", "not an image");
    EXPECT_THROW(load_images(dir_spec("d", tmp.path() / "d", DatasetRole::kReal)), IngestionError);
}

TEST(Dataset, DisjointnessCheck) {
    TempDir tmp("disjoint");
    write_images(tmp.path() / "a", 2);
    write_images(tmp.path() / "b", 2);
    const auto a = dir_spec("a", tmp.path() / "a", DatasetRole::kReal);
    const auto b = dir_spec("b", tmp.path() / "b", DatasetRole::kReal, DatasetSplit::kTest);
    EXPECT_NO_THROW(require_disjoint(a, b));
    EXPECT_THROW(require_disjoint(a, a), ProtocolError);
}

TEST(Dataset, MergeAndSubsetKeepBookkeeping) {
    TempDir tmp("merge");
    write_images(tmp.path() / "a", 2);
    write_images(tmp.path() / "b", 3);
    const LabeledImages parts[] = {load_images(dir_spec("a", tmp.path() / "a", DatasetRole::kReal)),
                                   load_images(dir_spec("b", tmp.path() / "b", DatasetRole::kFake))};
    const LabeledImages all = merge(parts);
    ASSERT_EQ(all.size(), 5u);
    EXPECT_EQ(all.labels, (LabelVector{0, 0, 1, 1, 1}));
    const std::size_t pick[] = {4, 0};
    const LabeledImages s = all.subset(pick);
    EXPECT_EQ(s.origins, (std::vector<std::string>{"b", "a"}));
    EXPECT_EQ(s.ids[0], all.ids[4]);
}

TEST(Dataset, StringConversions) {
    EXPECT_EQ(parse_role("fake"), DatasetRole::kFake);
    EXPECT_EQ(parse_split(to_string(DatasetSplit::kTest)), DatasetSplit::kTest);
    EXPECT_THROW(parse_role("synthetic"), ConfigError);
}
