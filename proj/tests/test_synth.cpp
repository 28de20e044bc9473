#include "sticker/data.hpp"
#include "sticker/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sticker;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Synth, SingleAttribute) {
  GeneratorConfig cfg;
  cfg.n = 1;
  cfg.num_tags = 4;
  cfg.attributes = {"circle"};
  const auto ds = generate_synthetic(cfg, 1);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.items[0].tags, std::vector<int>{ds.vocabulary.id("circle")});
}

TEST(Synth, Errors) {
  GeneratorConfig cfg;
  cfg.num_tags = 1;
  EXPECT_THROW(generate_synthetic(cfg, 1), DataError);
  cfg.num_tags = 2;
  cfg.attributes = {"circle", "striped", "jumping"};
  EXPECT_THROW(generate_synthetic(cfg, 1), DataError);
  cfg = {};
  cfg.num_tags = 99;
  EXPECT_THROW(generate_synthetic(cfg, 1), DataError);
}

TEST(Synth, ByteIdenticalReruns) {
  GeneratorConfig cfg;
  cfg.n = 20;
  const auto a = fs::temp_directory_path() / "sticker_synth_a";
  const auto b = fs::temp_directory_path() / "sticker_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  write_manifest(generate_synthetic(cfg, 7), a);
  write_manifest(generate_synthetic(cfg, 7), b);
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "images" / "syn-00004.png"), slurp(b / "images" / "syn-00004.png"));
}

TEST(Synth, MixtureMatchesConfiguration) {
  GeneratorConfig cfg;
  cfg.n = 2000;
  cfg.num_tags = 12;
  cfg.height = 16;
  cfg.width = 16;
  const auto st = tag_stats(generate_synthetic(cfg, 13));
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(st.tags_per_item_percent.at(k), 100.0 * cfg.tag_count_mixture[static_cast<std::size_t>(k - 1)], 2.0);
  }
}

TEST(Synth, QuotasSumToN) {
  const auto q = tag_count_quotas({0.5, 0.3, 0.2}, 7);
  EXPECT_EQ(q[0] + q[1] + q[2], 7);
}

TEST(Synth, PixelsInRangeAndMetaPresent) {
  GeneratorConfig cfg;
  cfg.n = 10;
  const auto ds = generate_synthetic(cfg, 2);
  for (const auto& it : ds.items) {
    for (float v : it.image.pixels.data) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
    EXPECT_TRUE(it.image.meta.count("role"));
    EXPECT_TRUE(it.image.meta.count("action"));
    EXPECT_TRUE(it.image.meta.count("style"));
  }
}
