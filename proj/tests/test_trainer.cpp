#include "sticker/checkpoint.hpp"
#include "sticker/synth.hpp"
#include "sticker/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sticker;
using namespace sticker::trainer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.model.image_height = 16;
  c.model.image_width = 16;
  c.model.patch = 8;
  c.model.d_model = 16;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.fusion_layers = 1;
  c.model.d_text = 8;
  c.text.dim = 8;
  c.text.layers = 1;
  c.text.heads = 2;
  c.epochs = 2;
  c.batch_size = 4;
  c.lr = 3e-3;
  c.seed = 5;
  return c;
}

struct Fixture {
  Dataset data;
  adg::DescriptionCache cache;
  PreparedSplit train, val;

  explicit Fixture(const TrainConfig& cfg) {
    GeneratorConfig gen;
    gen.n = 24;
    gen.num_tags = 4;
    gen.height = 16;
    gen.width = 16;
    data = generate_synthetic(gen, 3);
    adg::StubChatClient client;
    std::vector<StickerImage> stickers;
    for (const auto& it : data.items) stickers.push_back(it.image);
    adg::describe_all(stickers, client, cache);
    adg::TextEncoder enc(cfg.text);
    auto parts = split_dataset(data, {0.5, 0.25, 0.25}, 1);
    train = prepare(parts[0], cache, enc, cfg.model);
    val = prepare(parts[1], cache, enc, cfg.model);
  }
};

fs::path run_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sticker_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<json> read_log(const fs::path& path) {
  std::ifstream in(path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto c = small_config();
  c.model.ablations.no_prompt = true;
  c.penalty_mode = objective::PenaltyMode::hinge;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  c.text.dim = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Prepare, MissingDescriptionsListed) {
  const auto cfg = small_config();
  GeneratorConfig gen;
  gen.n = 3;
  gen.num_tags = 4;
  gen.height = 16;
  gen.width = 16;
  const auto ds = generate_synthetic(gen, 1);
  adg::DescriptionCache empty;
  adg::TextEncoder enc(cfg.text);
  try {
    prepare(ds, empty, enc, cfg.model);
    FAIL();
  } catch (const TrainError& e) {
    for (const auto& it : ds.items) EXPECT_NE(std::string(e.what()).find(it.image.id), std::string::npos);
  }
}

TEST(Prepare, OrderInvariantAndResizes) {
  auto cfg = small_config();
  Fixture f(cfg);
  Dataset rev = f.data;
  std::reverse(rev.items.begin(), rev.items.end());
  adg::TextEncoder enc(cfg.text);
  const auto a = prepare(f.data, f.cache, enc, cfg.model);
  const auto b = prepare(rev, f.cache, enc, cfg.model);
  ASSERT_EQ(a.examples.size(), b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    EXPECT_EQ(a.examples[i].id, b.examples[i].id);
    EXPECT_EQ(a.examples[i].patches, b.examples[i].patches);
  }
  cfg.model.image_height = cfg.model.image_width = 8;
  cfg.model.patch = 4;
  const auto small = prepare(f.data, f.cache, enc, cfg.model);
  EXPECT_EQ(small.examples[0].patches.rows(), 4);
  EXPECT_EQ(small.examples[0].patches.cols(), 48);
}

TEST(Train, ZeroEpochsSavesInitialModel) {
  auto cfg = small_config();
  cfg.epochs = 0;
  Fixture f(cfg);
  const auto dir = run_dir("zero");
  const auto r = train(cfg, f.train, f.val, dir);
  EXPECT_TRUE(fs::exists(r.best_checkpoint));
  EXPECT_TRUE(fs::exists(r.last_checkpoint));
  EXPECT_TRUE(r.epochs.empty());
  const auto loaded = load_model(r.best_checkpoint);
  EXPECT_EQ(loaded.config.model.num_tags, 4);
  Model<float> fresh(loaded.config.model);
  for (const auto& [name, var] : fresh.parameters().entries()) {
    EXPECT_EQ(var.value(), loaded.model->parameters().find(name)->value()) << name;
  }
}

TEST(Train, DeterministicLogsAndRoundTrip) {
  const auto cfg = small_config();
  Fixture f(cfg);
  const auto d1 = run_dir("det1"), d2 = run_dir("det2");
  const auto r1 = train(cfg, f.train, f.val, d1);
  const auto r2 = train(cfg, f.train, f.val, d2);
  EXPECT_EQ(slurp(d1 / "train_log.jsonl"), slurp(d2 / "train_log.jsonl"));
  EXPECT_EQ(slurp(r1.best_checkpoint), slurp(r2.best_checkpoint));
  const auto log = read_log(r1.log_path);
  EXPECT_EQ(log.size(), 2u * (3 + 1));
  EXPECT_TRUE(fs::exists(d1 / "val_probs.bin"));
  EXPECT_TRUE(fs::exists(d1 / "config.json"));

  const auto loaded = load_model(r1.best_checkpoint);
  const auto ev = evaluate(*loaded.model, f.val, loaded.config);
  const auto dump = metrics::read_probability_dump(d1 / "val_probs.bin");
  EXPECT_LT((ev.probs - dump.probs).cwiseAbs().maxCoeff(), 1e-6);
  const auto replay = metrics::report(dump.probs, dump.truths, loaded.config.ks, loaded.config.threshold);
  EXPECT_NEAR(replay.per_k.at(1).cf1, r1.best_cf1, 1e-9);
}

TEST(Train, NoLorPenaltyIsExactlyZero) {
  auto cfg = small_config();
  cfg.model.ablations.no_lor = true;
  Fixture f(cfg);
  const auto r = train(cfg, f.train, f.val, run_dir("nolor"));
  for (const auto& line : read_log(r.log_path)) {
    if (line.contains("step")) {
      EXPECT_EQ(line["penalty"].get<double>(), 0.0);
      EXPECT_EQ(line["total"].get<double>(), line["main"].get<double>());
    }
  }
}

TEST(Train, NoPenaltyTotalEqualsMain) {
  auto cfg = small_config();
  cfg.model.ablations.no_penalty = true;
  Fixture f(cfg);
  const auto r = train(cfg, f.train, f.val, run_dir("nopen"));
  for (const auto& line : read_log(r.log_path)) {
    if (line.contains("step")) EXPECT_EQ(line["total"].get<double>(), line["main"].get<double>());
  }
}

TEST(Train, ReconstructionWeightLogsL1) {
  auto cfg = small_config();
  cfg.epochs = 1;
  cfg.reconstruction_weight = 1.0;
  Fixture f(cfg);
  const auto r = train(cfg, f.train, f.val, run_dir("recon"));
  EXPECT_TRUE(read_log(r.log_path).front().contains("reconstruction_l1"));
}

TEST(LoadModel, VocabularyMismatchRejected) {
  auto cfg = small_config();
  cfg.epochs = 0;
  Fixture f(cfg);
  const auto r = train(cfg, f.train, f.val, run_dir("vocab"));
  const auto loaded = load_model(r.best_checkpoint);
  EXPECT_NO_THROW(check_vocabulary(loaded, f.train.vocabulary));
  auto tags = f.train.vocabulary.tags();
  std::swap(tags[0], tags[1]);
  EXPECT_THROW(check_vocabulary(loaded, TagVocabulary(tags)), TrainError);
}

TEST(AdamW, DecoupledDecayShrinksWithoutGradient) {
  nn::ParameterSet<float> ps;
  auto w = ps.add("w", Matrix<float>::Constant(1, 1, 2.0f));
  AdamW opt(ps, 0.1, 0.5);
  opt.step();
  EXPECT_NEAR(w.value()(0, 0), 2.0f * (1 - 0.1f * 0.5f), 1e-6);
}

TEST(ItemKey, Stable) {
  EXPECT_EQ(item_key("a"), item_key("a"));
  EXPECT_NE(item_key("a"), item_key("b"));
}
