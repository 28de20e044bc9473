#include "sticker/trainer.hpp"

#include "sticker/checkpoint.hpp"
#include "sticker/lor.hpp"
#include "sticker/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace sticker::trainer {

using nlohmann::json;

void TrainConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(lr > 0)) fail("lr must be > 0");
  if (weight_decay < 0) fail("weight_decay must be >= 0");
  if (batch_size < 1 || eval_batch_size < 1) fail("batch sizes must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (ks.empty()) fail("ks must not be empty");
  for (int k : ks) {
    if (k < 1) fail("every k must be >= 1");
  }
  if (!(threshold > 0 && threshold < 1)) fail("threshold must lie in (0, 1)");
  if (reconstruction_weight < 0) fail("reconstruction_weight must be >= 0");
  if (text.dim != model.d_text) fail("text encoder dim must equal model d_text");
  model.validate();
}

json to_json(const ModelConfig& c) {
  return {{"image_height", c.image_height},
          {"image_width", c.image_width},
          {"channels", c.channels},
          {"patch", c.patch},
          {"d_model", c.d_model},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ffn_mult", c.ffn_mult},
          {"fusion_layers", c.fusion_layers},
          {"d_text", c.d_text},
          {"num_tags", c.num_tags},
          {"mask_ratio", c.mask_ratio},
          {"positional", c.positional},
          {"encoder", c.encoder},
          {"prompt_mode", c.prompt_mode == PromptMode::global ? "global" : "per_sample"},
          {"no_lor", c.ablations.no_lor},
          {"no_prompt", c.ablations.no_prompt},
          {"no_penalty", c.ablations.no_penalty},
          {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.channels = j.value("channels", c.channels);
  c.patch = j.value("patch", c.patch);
  c.d_model = j.value("d_model", c.d_model);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.fusion_layers = j.value("fusion_layers", c.fusion_layers);
  c.d_text = j.value("d_text", c.d_text);
  c.num_tags = j.value("num_tags", c.num_tags);
  c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
  c.positional = j.value("positional", c.positional);
  c.encoder = j.value("encoder", c.encoder);
  c.prompt_mode = j.value("prompt_mode", std::string("per_sample")) == "global" ? PromptMode::global
                                                                                 : PromptMode::per_sample;
  c.ablations.no_lor = j.value("no_lor", false);
  c.ablations.no_prompt = j.value("no_prompt", false);
  c.ablations.no_penalty = j.value("no_penalty", false);
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"batch_size", c.batch_size},
          {"eval_batch_size", c.eval_batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"eval_seed", c.eval_seed},
          {"penalty_mode", objective::to_string(c.penalty_mode)},
          {"stop_grad_original", c.stop_grad_original},
          {"eval_original", c.eval_original},
          {"reconstruction_weight", c.reconstruction_weight},
          {"ks", c.ks},
          {"threshold", c.threshold},
          {"model", to_json(c.model)},
          {"text", {{"dim", c.text.dim},
                    {"layers", c.text.layers},
                    {"heads", c.text.heads},
                    {"buckets", c.text.buckets},
                    {"max_tokens", c.text.max_tokens},
                    {"seed", c.text.seed}}},
          {"data", c.data}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.eval_seed = j.value("eval_seed", c.eval_seed);
  c.penalty_mode = objective::parse_penalty_mode(j.value("penalty_mode", std::string("signed")));
  c.stop_grad_original = j.value("stop_grad_original", false);
  c.eval_original = j.value("eval_original", false);
  c.reconstruction_weight = j.value("reconstruction_weight", 0.0);
  c.ks = j.value("ks", c.ks);
  c.threshold = j.value("threshold", c.threshold);
  if (j.contains("data")) c.data = j.at("data");
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("text")) {
    const auto& t = j.at("text");
    c.text.dim = t.value("dim", c.text.dim);
    c.text.layers = t.value("layers", c.text.layers);
    c.text.heads = t.value("heads", c.text.heads);
    c.text.buckets = t.value("buckets", c.text.buckets);
    c.text.max_tokens = t.value("max_tokens", c.text.max_tokens);
    c.text.seed = t.value("seed", c.text.seed);
  }
  return c;
}

std::uint64_t item_key(const std::string& id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

PreparedSplit prepare(const Dataset& dataset, const adg::DescriptionCache& descriptions,
                      const adg::TextEncoder& encoder, const ModelConfig& config) {
  if (encoder.config().dim != config.d_text) throw TrainError("text encoder dim differs from model d_text");
  std::vector<std::string> missing;
  for (const auto& item : dataset.items) {
    if (!descriptions.get(item.image.id)) missing.push_back(item.image.id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::ostringstream msg;
    msg << missing.size() << " item(s) have no description:";
    for (const auto& id : missing) msg << ' ' << id;
    throw TrainError(msg.str());
  }
  PreparedSplit out;
  out.vocabulary = dataset.vocabulary;
  for (const auto& item : dataset.items) {
    Example ex;
    ex.id = item.image.id;
    ex.key = item_key(ex.id);
    ex.tags = item.tags;
    const Image& px = item.image.pixels;
    if (px.channels != config.channels) {
      throw TrainError("item " + ex.id + " has " + std::to_string(px.channels) + " channels, expected " +
                       std::to_string(config.channels));
    }
    const bool resize = px.height != config.image_height || px.width != config.image_width;
    ex.patches = lor::patchify(resize ? resize_bilinear(px, config.image_height, config.image_width) : px,
                               config.patch)
                     .patches;
    ex.descriptions = adg::encode_descriptions(*descriptions.get(ex.id), encoder);
    out.examples.push_back(std::move(ex));
  }
  std::sort(out.examples.begin(), out.examples.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  return out;
}

Batch<float> make_batch(const PreparedSplit& split, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw TrainError("empty batch");
  const auto& first = split.examples.at(indices.front());
  const Index n = first.patches.rows();
  const Index b = static_cast<Index>(indices.size());
  Batch<float> batch;
  batch.patches.resize(b * n, first.patches.cols());
  for (auto& d : batch.descriptions) d.resize(b, first.descriptions.cols());
  for (Index i = 0; i < b; ++i) {
    const auto& ex = split.examples.at(indices[static_cast<std::size_t>(i)]);
    batch.patches.middleRows(i * n, n) = ex.patches;
    for (std::size_t j = 0; j < 4; ++j) batch.descriptions[j].row(i) = ex.descriptions.row(static_cast<Index>(j));
    batch.labels.push_back(ex.tags);
    batch.keys.push_back(ex.key);
  }
  return batch;
}

AdamW::AdamW(nn::ParameterSet<float>& params, double lr, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(params), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& [name, var] : params_.entries()) {
    m_.push_back(Matrix<float>::Zero(var.rows(), var.cols()));
    v_.push_back(Matrix<float>::Zero(var.rows(), var.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const float b1 = static_cast<float>(b1_);
  const float b2 = static_cast<float>(b2_);
  const float c1 = static_cast<float>(1.0 - std::pow(b1_, static_cast<double>(t_)));
  const float c2 = static_cast<float>(1.0 - std::pow(b2_, static_cast<double>(t_)));
  const float lr = static_cast<float>(lr_);
  const float decay = static_cast<float>(1.0 - lr_ * wd_);
  const float eps = static_cast<float>(eps_);
  auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& var = entries[i].second;
    auto& w = var.mutable_value();
    w *= decay;
    if (!var.has_grad()) continue;
    const auto& g = var.grad();
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
    w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
  params_.zero_grad();
}

EvalResult evaluate(const Model<float>& model, const PreparedSplit& split, const TrainConfig& config) {
  ag::NoGradGuard no_grad;
  const auto n = split.examples.size();
  const auto m = static_cast<Index>(split.vocabulary.size());
  if (m != model.config().num_tags) throw TrainError("vocabulary size differs from the model's tag count");
  EvalResult out;
  out.probs.resize(static_cast<Index>(n), m);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.eval_batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(config.eval_batch_size)); ++i) {
      idx.push_back(i);
    }
    const auto batch = make_batch(split, idx);
    const auto dual = model.forward_dual(batch, config.eval_seed, config.eval_original);
    const auto& logits = config.eval_original ? dual.logits_original : dual.logits_reconstructed;
    for (Index r = 0; r < logits.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m));
      for (Index j = 0; j < m; ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(logits.value()(r, j));
      const auto p = softmax_row(row);
      for (Index j = 0; j < m; ++j) out.probs(static_cast<Index>(start) + r, j) = p[static_cast<std::size_t>(j)];
    }
  }
  for (const auto& ex : split.examples) out.truths.push_back(ex.tags);
  out.report = metrics::report(out.probs, out.truths, config.ks, config.threshold);
  return out;
}

json checkpoint_sidecar(const TrainConfig& config, const TagVocabulary& vocabulary, int epoch) {
  return {{"format", "STKCKPT1"},
          {"epoch", epoch},
          {"vocab_hash", vocabulary.hash()},
          {"vocabulary", vocabulary.tags()},
          {"config", to_json(config)}};
}

namespace {

ModelConfig effective_model_config(const TrainConfig& config, int num_tags) {
  ModelConfig mc = config.model;
  mc.num_tags = num_tags;
  mc.init_seed = derive_seed(config.seed, {1});
  return mc;
}

void init_prompts_from_data(Model<float>& model, const PreparedSplit& split) {
  if (model.config().prompt_mode != PromptMode::global || split.examples.empty()) return;
  std::array<Matrix<float>, 4> mean;
  for (std::size_t j = 0; j < 4; ++j) {
    mean[j] = Matrix<float>::Zero(1, split.examples.front().descriptions.cols());
    for (const auto& ex : split.examples) mean[j] += ex.descriptions.row(static_cast<Index>(j));
    mean[j] /= static_cast<float>(split.examples.size());
  }
  model.init_global_prompts(mean);
}

}  // namespace

TrainResult train(const TrainConfig& input_config, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const std::filesystem::path& out_dir, std::ostream* progress) {
  TrainConfig config = input_config;
  config.model = effective_model_config(config, train_split.vocabulary.size());
  config.validate();
  if (train_split.examples.empty()) throw TrainError("training split is empty");
  if (train_split.vocabulary.hash() != val_split.vocabulary.hash()) {
    throw TrainError("train and validation vocabularies differ");
  }
  std::filesystem::create_directories(out_dir);

  Model<float> model(config.model);
  init_prompts_from_data(model, train_split);
  AdamW opt(model.parameters(), config.lr, config.weight_decay, config.beta1, config.beta2, config.adam_eps);
  const objective::LossOptions loss_options{config.penalty_mode, config.model.ablations.no_penalty,
                                            config.stop_grad_original};
  const bool with_original = !config.model.ablations.no_penalty;

  {
    std::ofstream cfg(out_dir / "config.json", std::ios::trunc);
    cfg << to_json(config).dump(2) << '\n';
  }
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
  if (!log) throw TrainError("cannot write training log under " + out_dir.string());

  TrainResult result;
  result.log_path = out_dir / "train_log.jsonl";
  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";

  if (config.epochs == 0) {
    checkpoint::save(result.best_checkpoint, model.parameters(), checkpoint_sidecar(config, train_split.vocabulary, 0));
    checkpoint::save(result.last_checkpoint, model.parameters(), checkpoint_sidecar(config, train_split.vocabulary, 0));
    return result;
  }

  const auto start_time = std::chrono::steady_clock::now();
  const std::size_t n = train_split.examples.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  long global_step = 0;
  double initial_sum = 0;
  int initial_count = 0;
  constexpr int kInitialSteps = 20;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, {2, static_cast<std::uint64_t>(epoch)}));
    seeded_shuffle(order, shuffle_rng);

    EpochSummary summary;
    summary.epoch = epoch;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + bs)));
      const auto batch = make_batch(train_split, idx);
      const auto mask_seed =
          derive_seed(config.seed, {3, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(steps)});
      const bool with_recon = config.reconstruction_weight > 0 && !config.model.ablations.no_lor;
      const auto dual = model.forward_dual(batch, mask_seed, with_original, with_recon);
      const auto loss = objective::total_loss(dual.logits_reconstructed, dual.logits_original, batch.labels,
                                              loss_options);
      const auto b = loss.breakdown();
      if (!std::isfinite(b.total)) throw TrainError("non-finite loss at epoch " + std::to_string(epoch));
      auto objective_var = loss.total;
      double recon = 0.0;
      if (with_recon) {
        recon = dual.reconstruction_l1.scalar();
        objective_var = ag::add(objective_var, ag::affine(dual.reconstruction_l1,
                                                          static_cast<float>(config.reconstruction_weight), 0.0f));
      }
      objective_var.backward();
      opt.step();
      ++steps;
      ++global_step;
      summary.main += b.main;
      summary.penalty += b.penalty;
      summary.total += b.total;
      if (initial_count < kInitialSteps) {
        initial_sum += b.total;
        ++initial_count;
      }
      json line{{"epoch", epoch}, {"step", global_step}, {"main", b.main}, {"penalty", b.penalty}, {"total", b.total}};
      if (with_recon) line["reconstruction_l1"] = recon;
      log << line.dump() << '\n';
    }
    summary.main /= steps;
    summary.penalty /= steps;
    summary.total /= steps;

    const auto eval = evaluate(model, val_split, config);
    summary.val = eval.report;
    log << json{{"epoch", epoch},
                {"train_main", summary.main},
                {"train_penalty", summary.penalty},
                {"train_total", summary.total},
                {"metrics", metrics::to_json(eval.report)}}
                   .dump()
        << '\n';
    log.flush();

    const double cf1 = eval.report.per_k.begin()->second.cf1;
    if (cf1 > result.best_cf1) {
      result.best_cf1 = cf1;
      result.best_epoch = epoch;
      checkpoint::save(result.best_checkpoint, model.parameters(),
                       checkpoint_sidecar(config, train_split.vocabulary, epoch));
      metrics::write_probability_dump(out_dir / "val_probs.bin", {eval.probs, eval.truths, val_split.vocabulary.hash()});
    }
    result.epochs.push_back(summary);
    if (progress != nullptr) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      const auto& top1 = eval.report.per_k.begin()->second;
      *progress << "epoch " << epoch << "/" << config.epochs << " loss " << summary.total << " (main "
                << summary.main << ", penalty " << summary.penalty << ") val top-" << eval.report.per_k.begin()->first
                << " CR " << top1.cr << " CF1 " << top1.cf1 << " [" << secs << " s]" << std::endl;
    }
  }
  result.initial_loss = initial_sum / std::max(1, initial_count);
  checkpoint::save(result.last_checkpoint, model.parameters(),
                   checkpoint_sidecar(config, train_split.vocabulary, config.epochs));
  return result;
}

LoadedModel load_model(const std::filesystem::path& checkpoint_path) {
  const auto archive = checkpoint::load(checkpoint_path);
  LoadedModel out;
  try {
    out.config = train_config_from_json(archive.sidecar.at("config"));
    out.vocabulary = TagVocabulary(archive.sidecar.at("vocabulary").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw TrainError("bad checkpoint sidecar: " + std::string(e.what()));
  }
  if (out.vocabulary.hash() != archive.sidecar.value("vocab_hash", std::string())) {
    throw TrainError("checkpoint sidecar vocabulary does not match its hash");
  }
  out.model = std::make_unique<Model<float>>(out.config.model);
  checkpoint::restore(archive, out.model->parameters());
  return out;
}

void check_vocabulary(const LoadedModel& loaded, const TagVocabulary& vocabulary) {
  if (loaded.vocabulary.hash() != vocabulary.hash()) {
    throw TrainError("vocabulary hash mismatch: checkpoint " + loaded.vocabulary.hash() + " vs dataset " +
                     vocabulary.hash());
  }
}

}  // namespace sticker::trainer
