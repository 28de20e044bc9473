#include "sticker/data.hpp"
#include "sticker/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

using namespace sticker;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sticker_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset tiny_dataset(int n) {
  GeneratorConfig cfg;
  cfg.n = n;
  cfg.num_tags = 4;
  cfg.height = 16;
  cfg.width = 16;
  return generate_synthetic(cfg, 3);
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(TagVocabulary, Invariants) {
  EXPECT_THROW(TagVocabulary({"a"}), DataError);
  EXPECT_THROW(TagVocabulary({"a", "a"}), DataError);
  EXPECT_THROW(TagVocabulary({"a", ""}), DataError);
  TagVocabulary v({"b", "a"});
  EXPECT_EQ(v.id("a"), 1);
  EXPECT_EQ(v.find("zzz"), -1);
  EXPECT_NE(v.hash(), TagVocabulary({"a", "b"}).hash());
}

TEST(TagVocabulary, BlankLineIsRejected) {
  const auto dir = fresh_dir("vocab");
  write_file(dir / "v.txt", "a\n\nb\n");
  EXPECT_THROW(TagVocabulary::load(dir / "v.txt"), DataError);
}

TEST(Manifest, SingleRecord) {
  const auto dir = fresh_dir("single");
  auto ds = tiny_dataset(1);
  write_manifest(ds, dir);
  const auto loaded = load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {16, 16});
  ASSERT_EQ(loaded.dataset.size(), 1u);
  EXPECT_EQ(loaded.dataset.items[0].tags, ds.items[0].tags);
}

TEST(Manifest, UnknownTagErrorNamesTheTag) {
  const auto dir = fresh_dir("unknown");
  write_manifest(tiny_dataset(2), dir);
  std::ofstream(dir / "manifest.jsonl", std::ios::app)
      << R"({"id":"x","image":"images/syn-00000.png","tags":["Peeping"]})" << '\n';
  try {
    load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {16, 16});
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("\"Peeping\""), std::string::npos);
  }
}

TEST(Manifest, EmptyTagListIsHardError) {
  const auto dir = fresh_dir("empty");
  write_manifest(tiny_dataset(2), dir);
  std::ofstream(dir / "manifest.jsonl", std::ios::app) << R"({"id":"x","image":"images/syn-00000.png","tags":[]})"
                                                        << '\n';
  EXPECT_THROW(load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {16, 16}), DataError);
}

TEST(Manifest, MissingImageIsItemLevelError) {
  const auto dir = fresh_dir("missing");
  auto ds = tiny_dataset(3);
  write_manifest(ds, dir);
  fs::remove(dir / "images" / (ds.items[1].image.id + ".png"));
  const auto loaded = load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {16, 16});
  EXPECT_EQ(loaded.dataset.size(), 2u);
  ASSERT_EQ(loaded.errors.size(), 1u);
  EXPECT_EQ(loaded.errors[0].id, ds.items[1].image.id);
}

TEST(Manifest, RoundTripPreservesIdsTagsAndChecksums) {
  const auto dir = fresh_dir("roundtrip");
  auto ds = tiny_dataset(12);
  write_manifest(ds, dir);
  const auto loaded = load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {16, 16}).dataset;
  ASSERT_EQ(loaded.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(loaded.items[i].image.id, ds.items[i].image.id);
    EXPECT_EQ(loaded.items[i].tags, ds.items[i].tags);
    EXPECT_EQ(image_checksum(loaded.items[i].image.pixels), image_checksum(ds.items[i].image.pixels));
    EXPECT_EQ(loaded.items[i].image.meta, ds.items[i].image.meta);
  }
}

TEST(Manifest, ResizesToConfiguredSize) {
  const auto dir = fresh_dir("resize");
  write_manifest(tiny_dataset(2), dir);
  const auto loaded = load_manifest(dir / "manifest.jsonl", dir / "vocab.txt", {32, 24}).dataset;
  EXPECT_EQ(loaded.items[0].image.pixels.height, 32);
  EXPECT_EQ(loaded.items[0].image.pixels.width, 24);
  for (float v : loaded.items[0].image.pixels.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

namespace {

Dataset counted(int n) {
  Dataset ds;
  ds.vocabulary = TagVocabulary({"a", "b"});
  for (int i = 0; i < n; ++i) {
    DatasetItem it;
    it.image.id = "id" + std::to_string(1000 + i);
    it.tags = {i % 2};
    ds.items.push_back(it);
  }
  return ds;
}

}  // namespace

TEST(Split, SizesFollowFloorWithRemainderToTrain) {
  auto s = split_dataset(counted(10), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(s[0].size(), 8u);
  EXPECT_EQ(s[1].size(), 1u);
  EXPECT_EQ(s[2].size(), 1u);
  s = split_dataset(counted(3), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1);
  EXPECT_EQ(s[0].size(), 1u);
  EXPECT_EQ(s[1].size(), 1u);
  EXPECT_EQ(s[2].size(), 1u);
  s = split_dataset(counted(13571), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(s[0].size(), 10857u);
  EXPECT_EQ(s[1].size(), 1357u);
  EXPECT_EQ(s[2].size(), 1357u);
}

TEST(Split, IsAPartitionForManySeeds) {
  const auto ds = counted(37);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_dataset(ds, {0.7, 0.2, 0.1}, seed);
    std::multiset<std::string> ids;
    for (const auto& part : s) {
      for (const auto& it : part.items) ids.insert(it.image.id);
    }
    EXPECT_EQ(ids.size(), 37u);
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 37u);
  }
}

TEST(Split, IndependentOfInputOrder) {
  auto ds = counted(20);
  auto rev = ds;
  std::reverse(rev.items.begin(), rev.items.end());
  const auto a = split_dataset(ds, {0.8, 0.1, 0.1}, 5);
  const auto b = split_dataset(rev, {0.8, 0.1, 0.1}, 5);
  for (int p = 0; p < 3; ++p) {
    ASSERT_EQ(a[p].size(), b[p].size());
    for (std::size_t i = 0; i < a[p].size(); ++i) EXPECT_EQ(a[p].items[i].image.id, b[p].items[i].image.id);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset(counted(2), {0.8, 0.1, 0.1}, 1), DataError);
  EXPECT_THROW(split_dataset(counted(10), {0.8, 0.1, 0.2}, 1), DataError);
  EXPECT_THROW(split_dataset(counted(10), {1.0, 0.0, 0.0}, 1), DataError);
}

TEST(TagStats, Distributions) {
  Dataset ds;
  ds.vocabulary = TagVocabulary({"big smile", "b"});
  for (int i = 0; i < 3; ++i) {
    DatasetItem it;
    it.image.id = std::to_string(i);
    it.tags = i == 0 ? std::vector<int>{0} : std::vector<int>{0, 1};
    ds.items.push_back(it);
  }
  const auto st = tag_stats(ds);
  EXPECT_NEAR(st.tags_per_item_percent.at(1), 100.0 / 3, 1e-9);
  EXPECT_NEAR(st.tags_per_item_percent.at(2), 200.0 / 3, 1e-9);
  EXPECT_EQ(st.per_tag_counts, (std::vector<int>{3, 2}));
  EXPECT_NEAR(st.mean_tag_length_words, 1.5, 1e-12);
  double sum = 0;
  for (const auto& [k, v] : st.tags_per_item_percent) sum += v;
  EXPECT_NEAR(sum, 100.0, 1e-6);
}
