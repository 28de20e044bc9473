#include "sticker/cli.hpp"

#include "sticker/adg.hpp"
#include "sticker/checkpoint.hpp"
#include "sticker/data.hpp"
#include "sticker/lor.hpp"
#include "sticker/synth.hpp"
#include "sticker/tagset.hpp"
#include "sticker/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace sticker::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::unique_ptr<adg::ChatClient> make_client(const std::string& name) {
  if (name == "stub") return std::make_unique<adg::StubChatClient>();
  const auto cfg = adg::HttpClientConfig::from_env();
  if (!cfg) throw UsageError("http client needs STICKER_CHAT_BASE_URL (and optionally STICKER_CHAT_API_KEY)");
  return std::make_unique<adg::HttpChatClient>(*cfg);
}

struct DataArgs {
  std::string dir;
  std::string cache;

  fs::path manifest() const { return fs::path(dir) / "manifest.jsonl"; }
  fs::path vocab() const { return fs::path(dir) / "vocab.txt"; }
  fs::path cache_path() const { return cache.empty() ? fs::path(dir) / "descriptions.jsonl" : fs::path(cache); }
};

Dataset load_data(const DataArgs& args, int size, std::ostream& err) {
  if (!fs::exists(args.manifest())) throw UsageError("no manifest at " + args.manifest().string());
  if (!fs::exists(args.vocab())) throw UsageError("no vocabulary at " + args.vocab().string());
  auto loaded = load_manifest(args.manifest(), args.vocab(), {size, size});
  for (const auto& e : loaded.errors) err << "skipped " << e.id << ": " << e.message << '\n';
  return std::move(loaded.dataset);
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  GeneratorConfig gen;
  std::string out;
  std::uint64_t seed = 0;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--n", a.gen.n, "Number of stickers")->capture_default_str();
  app.add_option("--tags", a.gen.num_tags, "Vocabulary size m")->capture_default_str();
  app.add_option("--height", a.gen.height, "Image height")->capture_default_str();
  app.add_option("--width", a.gen.width, "Image width")->capture_default_str();
  app.add_option("--noise", a.gen.noise, "Uniform pixel noise amplitude")->capture_default_str();
  app.add_option("--mixture", a.gen.tag_count_mixture, "Probabilities of 1, 2, 3... tags per item")
      ->capture_default_str();
  app.add_option("--attributes", a.gen.attributes, "Restrict items to these tags");
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--seed", a.seed, "Random seed")->capture_default_str();
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  Dataset ds;
  try {
    ds = generate_synthetic(a.gen, a.seed);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  write_manifest(ds, a.out);
  out << "wrote " << ds.size() << " stickers, " << ds.vocabulary.size() << " tags to " << a.out << '\n';
  return kExitOk;
}

// ---- describe -------------------------------------------------------------

struct DescribeArgs {
  DataArgs data;
  std::string client = "stub";
  int parallel = 1;
  int retries = 3;
  std::uint64_t seed = 0;
};

void add_describe(CLI::App& app, DescribeArgs& a) {
  app.add_option("--data", a.data.dir, "Directory holding manifest.jsonl and vocab.txt")->required();
  app.add_option("--cache", a.data.cache, "Description cache (default <data>/descriptions.jsonl)");
  app.add_option("--client", a.client, "Chat client")->check(CLI::IsMember({"stub", "http"}))->capture_default_str();
  app.add_option("--parallel", a.parallel, "Concurrent requests")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--retries", a.retries, "Attempts per sticker")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "Random seed (unused by the stub client)")->capture_default_str();
}

int run_describe(const DescribeArgs& a, std::ostream& out, std::ostream& err) {
  auto client = make_client(a.client);
  const auto ds = load_data(a.data, 0, err);
  std::vector<StickerImage> stickers;
  for (const auto& item : ds.items) stickers.push_back(item.image);
  adg::DescriptionCache cache(a.data.cache_path());
  const auto stats = adg::describe_all(stickers, *client, cache, a.parallel, {a.retries});
  out << stats.cached << " cached, " << stats.generated << " generated -> " << a.data.cache_path().string() << '\n';
  return kExitOk;
}

// ---- tagset ---------------------------------------------------------------

struct TagsetArgs {
  std::string corpus;
  std::string stop_words;
  int k = 0;
  int k_min = 2;
  int k_max = 12;
  int coarse_step = 1;
  int restarts = 4;
  int top = 5;
  std::string out;
  std::uint64_t seed = 0;
};

void add_tagset(CLI::App& app, TagsetArgs& a) {
  app.add_option("--corpus", a.corpus, "Keyword corpus, one entry per line")->required();
  app.add_option("--stop-words", a.stop_words, "Stop-word file, one per line");
  app.add_option("--k", a.k, "Fixed cluster count; 0 runs the elbow search")->capture_default_str();
  app.add_option("--k-min", a.k_min, "Elbow sweep lower bound")->capture_default_str();
  app.add_option("--k-max", a.k_max, "Elbow sweep upper bound")->capture_default_str();
  app.add_option("--coarse-step", a.coarse_step, "Coarse sweep step (1 = single phase)")->capture_default_str();
  app.add_option("--restarts", a.restarts, "k-means restarts")->capture_default_str();
  app.add_option("--top-terms", a.top, "Terms per cluster in the worksheet")->capture_default_str();
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--seed", a.seed, "Random seed")->capture_default_str();
}

int run_tagset(const TagsetArgs& a, std::ostream& out) {
  const auto lines = read_lines(a.corpus);
  std::set<std::string> stop;
  if (!a.stop_words.empty()) {
    for (const auto& w : read_lines(a.stop_words)) {
      if (!w.empty()) stop.insert(w);
    }
  }
  std::vector<std::string> entries;
  for (const auto& l : lines) {
    if (l.find_first_not_of(" \t") != std::string::npos) entries.push_back(l);
  }
  tagset::TfidfMatrix tfidf;
  tagset::ClusterResult clusters;
  json report;
  try {
    const auto corpus = tagset::KeywordCorpus::from_lines(entries, tagset::whitespace_tokenize, stop);
    tfidf = tagset::tfidf_features(corpus);
    int k = a.k;
    if (k <= 0) {
      const auto elbow = tagset::elbow_search(tfidf.features, a.k_min, std::min<int>(a.k_max, static_cast<int>(tfidf.features.rows())),
                                              a.coarse_step, a.seed, a.restarts);
      k = elbow.selected_k;
      json coarse = json::array();
      for (const auto& p : elbow.coarse_curve) coarse.push_back({{"k", p.k}, {"sse", p.sse}});
      json fine = json::array();
      for (const auto& p : elbow.fine_curve) fine.push_back({{"k", p.k}, {"sse", p.sse}});
      report["elbow"] = {{"selected_k", elbow.selected_k}, {"coarse_k", elbow.coarse_k},
                         {"fine_bracket", {elbow.fine_lo, elbow.fine_hi}}, {"no_knee", elbow.no_knee},
                         {"coarse_curve", coarse}, {"fine_curve", fine}};
    }
    clusters = tagset::kmeans_cluster(tfidf.features, k, a.seed, a.restarts);
  } catch (const tagset::TagsetError& e) {
    throw UsageError(e.what());
  }
  const auto terms = tagset::top_terms(clusters, tfidf.terms, a.top);
  report["k"] = clusters.k;
  report["sse"] = clusters.sse;
  report["assignments"] = clusters.assignments;
  json cl = json::array();
  std::ostringstream sheet;
  sheet << "cluster\tsize\ttop_terms\tannotator_1\tannotator_2\tannotator_3\n";
  for (int c = 0; c < clusters.k; ++c) {
    json members = json::array();
    for (std::size_t i = 0; i < clusters.assignments.size(); ++i) {
      if (clusters.assignments[i] == c) members.push_back(entries[i]);
    }
    cl.push_back({{"id", c}, {"size", members.size()}, {"top_terms", terms[static_cast<std::size_t>(c)]},
                  {"members", members}});
    sheet << c << '\t' << members.size() << '\t';
    for (std::size_t t = 0; t < terms[static_cast<std::size_t>(c)].size(); ++t) {
      sheet << (t ? " " : "") << terms[static_cast<std::size_t>(c)][t];
    }
    sheet << "\t\t\t\n";
  }
  report["clusters"] = cl;
  write_text(fs::path(a.out) / "cluster_report.json", report.dump(2) + "\n");
  write_text(fs::path(a.out) / "naming_worksheet.tsv", sheet.str());
  out << "k=" << clusters.k << " sse=" << clusters.sse << " -> " << a.out << '\n';
  return kExitOk;
}

// ---- shared model flags ---------------------------------------------------

struct ModelArgs {
  trainer::TrainConfig cfg;
  int image_size = 64;
  std::string penalty_mode = "signed";
  std::string prompt_mode = "per_sample";
};

void add_model_flags(CLI::App& app, ModelArgs& a) {
  auto& c = a.cfg;
  app.add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  app.add_option("--lr", c.lr, "AdamW learning rate")->capture_default_str();
  app.add_option("--weight-decay", c.weight_decay, "AdamW weight decay")->capture_default_str();
  app.add_option("--batch-size", c.batch_size, "Training batch size")->capture_default_str();
  app.add_option("--eval-seed", c.eval_seed, "Mask seed used for evaluation")->capture_default_str();
  app.add_flag("--no-lor", c.model.ablations.no_lor, "Ablation: renewed attention fixed to 1");
  app.add_flag("--no-prompt", c.model.ablations.no_prompt, "Ablation: omit the prompt slots");
  app.add_flag("--no-penalty", c.model.ablations.no_penalty, "Ablation: drop the confidence penalty");
  app.add_option("--penalty-mode", a.penalty_mode, "signed or hinge")
      ->check(CLI::IsMember({"signed", "hinge"}))
      ->capture_default_str();
  app.add_flag("--stop-grad-original", c.stop_grad_original, "Treat the original path as a constant");
  app.add_option("--reconstruction-weight", c.reconstruction_weight, "Auxiliary L1 pixel-reconstruction weight")
      ->capture_default_str();
  app.add_option("--prompt-mode", a.prompt_mode, "per_sample or global")
      ->check(CLI::IsMember({"per_sample", "global"}))
      ->capture_default_str();
  app.add_option("--mask-ratio", c.model.mask_ratio, "Fraction of patches masked per round")->capture_default_str();
  app.add_option("--image-size", a.image_size, "Square input size")->capture_default_str();
  app.add_option("--patch", c.model.patch, "Patch size P")->capture_default_str();
  app.add_option("--d-model", c.model.d_model, "Model width")->capture_default_str();
  app.add_option("--layers", c.model.layers, "Image encoder layers")->capture_default_str();
  app.add_option("--heads", c.model.heads, "Attention heads")->capture_default_str();
  app.add_option("--fusion-layers", c.model.fusion_layers, "Fusion encoder layers")->capture_default_str();
  app.add_option("--d-text", c.model.d_text, "Description embedding width")->capture_default_str();
  app.add_flag("--no-positions", [&c](std::int64_t) { c.model.positional = false; }, "Drop patch positions");
}

trainer::TrainConfig finish_model_args(const ModelArgs& a) {
  auto c = a.cfg;
  c.model.image_height = a.image_size;
  c.model.image_width = a.image_size;
  c.text.dim = c.model.d_text;
  c.penalty_mode = objective::parse_penalty_mode(a.penalty_mode);
  c.model.prompt_mode = a.prompt_mode == "global" ? PromptMode::global : PromptMode::per_sample;
  try {
    auto check = c;
    check.model.num_tags = std::max(2, check.model.num_tags);
    check.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json ablation_json(const Ablations& a) {
  return {{"no_lor", a.no_lor}, {"no_prompt", a.no_prompt}, {"no_penalty", a.no_penalty}};
}

int split_index(const std::string& name) {
  if (name == "train") return 0;
  if (name == "val") return 1;
  if (name == "test") return 2;
  if (name == "all") return -1;
  throw UsageError("split must be train, val, test or all");
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  DataArgs data;
  ModelArgs model;
  std::vector<double> split{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 0;
  std::string out;
  std::uint64_t seed = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--data", a.data.dir, "Directory holding manifest.jsonl and vocab.txt")->required();
  app.add_option("--cache", a.data.cache, "Description cache (default <data>/descriptions.jsonl)");
  app.add_option("--split", a.split, "train/val/test ratios")->expected(3)->capture_default_str();
  app.add_option("--split-seed", a.split_seed, "Seed of the dataset split")->capture_default_str();
  app.add_option("--out", a.out, "Run directory")->required();
  app.add_option("--seed", a.seed, "Training seed")->capture_default_str();
  add_model_flags(app, a.model);
}

std::array<Dataset, 3> split_for(const Dataset& ds, const std::vector<double>& ratios, std::uint64_t seed) {
  try {
    if (ratios.size() != 3) throw UsageError("--split needs three ratios");
    return split_dataset(ds, {ratios[0], ratios[1], ratios[2]}, seed);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

json eval_report(const trainer::EvalResult& ev, const trainer::TrainConfig& cfg, const std::string& checkpoint,
                 const std::string& split) {
  return {{"checkpoint", checkpoint},
          {"split", split},
          {"ablations", ablation_json(cfg.model.ablations)},
          {"path", cfg.eval_original ? "original" : "reconstructed"},
          {"penalty_mode", objective::to_string(cfg.penalty_mode)},
          {"metrics", metrics::to_json(ev.report)}};
}

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  auto cfg = finish_model_args(a.model);
  cfg.seed = a.seed;
  const auto ds = load_data(a.data, a.model.image_size, err);
  const auto splits = split_for(ds, a.split, a.split_seed);
  adg::DescriptionCache cache(a.data.cache_path());
  adg::TextEncoder encoder(cfg.text);
  cfg.data = {{"data", a.data.dir}, {"split", a.split}, {"split_seed", a.split_seed}};
  std::array<trainer::PreparedSplit, 3> prepared;
  for (std::size_t i = 0; i < 3; ++i) prepared[i] = trainer::prepare(splits[i], cache, encoder, cfg.model);
  const auto result = trainer::train(cfg, prepared[0], prepared[1], a.out, &err);
  auto loaded = trainer::load_model(result.best_checkpoint);
  const auto ev = trainer::evaluate(*loaded.model, prepared[2], loaded.config);
  const auto report = eval_report(ev, loaded.config, result.best_checkpoint.string(), "test");
  write_text(fs::path(a.out) / "test_report.json", report.dump(2) + "\n");
  metrics::write_probability_dump(fs::path(a.out) / "test_probs.bin", {ev.probs, ev.truths, ds.vocabulary.hash()});
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::string checkpoint;
  std::string split = "test";
  std::string out;
  std::string dump;
  bool original = false;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
  app.add_option("--data", a.data.dir, "Directory holding manifest.jsonl and vocab.txt")->required();
  app.add_option("--cache", a.data.cache, "Description cache (default <data>/descriptions.jsonl)");
  app.add_option("--split", a.split, "train, val, test or all")->capture_default_str();
  app.add_option("--out", a.out, "Report path (default stdout only)");
  app.add_option("--dump", a.dump, "Probability dump path");
  app.add_flag("--original", a.original, "Score the original path instead of the reconstructed one");
  a.seed_opt = app.add_option("--seed", a.seed, "Evaluation mask seed (default from checkpoint)");
}

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  auto loaded = trainer::load_model(a.checkpoint);
  if (a.seed_opt->count() > 0) loaded.config.eval_seed = a.seed;
  loaded.config.eval_original = a.original;
  const auto& mc = loaded.config.model;
  const auto ds = load_data(a.data, mc.image_height, err);
  trainer::check_vocabulary(loaded, ds.vocabulary);
  const int which = split_index(a.split);
  Dataset part = ds;
  if (which >= 0) {
    const auto& d = loaded.config.data;
    const auto ratios = d.value("split", std::vector<double>{0.8, 0.1, 0.1});
    part = split_for(ds, ratios, d.value("split_seed", std::uint64_t{0}))[static_cast<std::size_t>(which)];
  }
  adg::DescriptionCache cache(a.data.cache_path());
  adg::TextEncoder encoder(loaded.config.text);
  const auto prepared = trainer::prepare(part, cache, encoder, mc);
  const auto ev = trainer::evaluate(*loaded.model, prepared, loaded.config);
  const auto report = eval_report(ev, loaded.config, a.checkpoint, a.split);
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  if (!a.dump.empty()) metrics::write_probability_dump(a.dump, {ev.probs, ev.truths, ds.vocabulary.hash()});
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  int topc = 3;
  std::string cache;
  std::string id;
  std::string client = "stub";
  bool attention = false;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
  app.add_option("--image", a.image, "PNG or JPEG image")->required()->check(CLI::ExistingFile);
  app.add_option("--topc", a.topc, "Number of tags to print")->capture_default_str();
  app.add_option("--cache", a.cache, "Description cache to look the sticker up in");
  app.add_option("--id", a.id, "Sticker id in the cache (default: image file stem)");
  app.add_option("--client", a.client, "Client used when no cached description exists")
      ->check(CLI::IsMember({"stub", "http"}))
      ->capture_default_str();
  app.add_flag("--attention", a.attention, "Also print the renewed attention as a JSON line");
  a.seed_opt = app.add_option("--seed", a.seed, "Mask seed (default from checkpoint)");
}

int run_predict(const PredictArgs& a, std::ostream& out) {
  auto loaded = trainer::load_model(a.checkpoint);
  if (a.seed_opt->count() > 0) loaded.config.eval_seed = a.seed;
  const auto& mc = loaded.config.model;
  if (a.topc < 1 || a.topc > mc.num_tags) {
    throw UsageError("--topc must lie in [1, " + std::to_string(mc.num_tags) + "]");
  }
  StickerImage sticker;
  sticker.id = a.id.empty() ? fs::path(a.image).stem().string() : a.id;
  sticker.pixels = read_image(a.image);
  if (sticker.pixels.height != mc.image_height || sticker.pixels.width != mc.image_width) {
    sticker.pixels = resize_bilinear(sticker.pixels, mc.image_height, mc.image_width);
  }
  adg::DescriptionCache cache = a.cache.empty() ? adg::DescriptionCache() : adg::DescriptionCache(a.cache);
  adg::AttributeDescriptions desc;
  if (auto hit = cache.get(sticker.id)) {
    desc = *hit;
  } else {
    adg::DescriptionCache scratch;
    auto client = make_client(a.client);
    desc = adg::describe(sticker, *client, scratch);
  }
  adg::TextEncoder encoder(loaded.config.text);
  trainer::PreparedSplit split;
  split.vocabulary = loaded.vocabulary;
  trainer::Example ex;
  ex.id = sticker.id;
  ex.key = trainer::item_key(ex.id);
  ex.patches = lor::patchify(sticker.pixels, mc.patch).patches;
  ex.descriptions = adg::encode_descriptions(desc, encoder);
  ex.tags = {0};
  split.examples.push_back(std::move(ex));
  const auto ev = trainer::evaluate(*loaded.model, split, loaded.config);
  std::vector<double> probs(ev.probs.row(0).data(), ev.probs.row(0).data() + ev.probs.cols());
  const auto pred = topc_select(probs, a.topc);
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < pred.topc.size(); ++i) {
    out << loaded.vocabulary.tag(pred.topc[i]) << '\t' << pred.probs[i] << '\n';
  }
  if (a.attention) {
    ag::NoGradGuard no_grad;
    const auto dual = loaded.model->forward_dual(trainer::make_batch(split, {0}), loaded.config.eval_seed, false);
    std::vector<double> weights, raw;
    for (Index i = 0; i < dual.attention.rows(); ++i) {
      weights.push_back(dual.attention.value()(i, 0));
      raw.push_back(dual.similarity(i, 0));
    }
    out << json{{"attention", weights}, {"similarity", raw}}.dump() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sticker multi-tag recognition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; [section] names match subcommands");
  app.option_defaults()->always_capture_default();

  SynthArgs synth;
  DescribeArgs describe;
  TagsetArgs tags;
  TrainArgs train;
  EvalArgs eval;
  PredictArgs predict;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic sticker corpus");
  add_synth(*s_synth, synth);
  auto* s_describe = app.add_subcommand("describe", "Generate attribute descriptions into the cache");
  add_describe(*s_describe, describe);
  auto* s_tagset = app.add_subcommand("tagset", "Cluster keywords and pick k with the elbow method");
  add_tagset(*s_tagset, tags);
  auto* s_train = app.add_subcommand("train", "Train a tagger and score it on the test split");
  add_train(*s_train, train);
  auto* s_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_eval(*s_eval, eval);
  auto* s_predict = app.add_subcommand("predict", "Print the top-C tags for one image");
  add_predict(*s_predict, predict);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  err << "# effective configuration\n[" << active->get_name() << "]\n" << active->config_to_str(true, false);
  err.flush();

  try {
    if (active == s_synth) return run_synth(synth, out);
    if (active == s_describe) return run_describe(describe, out, err);
    if (active == s_tagset) return run_tagset(tags, out);
    if (active == s_train) return run_train(train, out, err);
    if (active == s_eval) return run_eval(eval, out, err);
    if (active == s_predict) return run_predict(predict, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sticker::cli
