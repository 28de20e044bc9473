#include "sticker/model.hpp"

#include "sticker/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sticker {

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (patch <= 0 || image_height % patch != 0 || image_width % patch != 0) {
    fail("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
         " is not divisible by patch size " + std::to_string(patch));
  }
  if (channels < 1) fail("channels must be >= 1");
  if (d_model < 1 || heads < 1 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if (layers < 1 || fusion_layers < 1) fail("encoders need at least one layer");
  if (d_text < 1) fail("d_text must be positive");
  if (num_tags < 2) fail("need at least 2 tags");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) fail("mask_ratio must lie in (0, 1)");
  if (encoder != "transformer") fail("unknown encoder \"" + encoder + "\"");
}

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  nn::Initializer init(config_.init_seed);
  const Index d = config_.d_model;
  const Index n = config_.patches();
  const Index dp = config_.patch_dim();

  patch_proj_ = nn::Linear<T>(params_, "patch_embed", dp, d, init);
  positions_ = params_.add("patch_positions", init.normal<T>(n, d, 0.02));
  encoder_ = std::make_unique<TransformerPatchEncoder<T>>(
      params_, "image_encoder",
      nn::TransformerShape{d, config_.layers, config_.heads, config_.ffn_mult}, init);
  mask_token_ = params_.add("lor.mask_token", Matrix<T>::Constant(1, dp, T(0.5)));
  pixel_head_.weight = params_.add("lor.pixel_head.weight", init.normal<T>(d, dp, 0.02));
  pixel_head_.bias = params_.add("lor.pixel_head.bias", Matrix<T>::Constant(1, dp, T(0.5)));
  for (int j = 0; j < 4; ++j) {
    prompt_proj_[static_cast<std::size_t>(j)] =
        nn::Linear<T>(params_, "prompt.proj." + std::to_string(j), config_.d_text, d, init);
  }
  global_prompts_ = params_.add("prompt.global", init.normal<T>(4, d, 0.02));
  cls_ = params_.add("fusion.cls", init.normal<T>(1, d, 0.02));
  sep_ = params_.add("fusion.sep", init.normal<T>(1, d, 0.02));
  fusion_positions_ = params_.add("fusion.positions", init.normal<T>(7, d, 0.02));
  fusion_ = nn::TransformerEncoder<T>(params_, "fusion", {d, config_.fusion_layers, config_.heads, config_.ffn_mult},
                                      init);
  classifier_.weight = params_.add("classifier.weight", init.normal<T>(d, config_.num_tags, 0.02));
  classifier_.bias = params_.add("classifier.bias", Matrix<T>::Zero(1, config_.num_tags));
}

template <typename T>
Var<T> Model<T>::tokenize(const Var<T>& patches) const {
  if (patches.cols() != config_.patch_dim()) {
    throw std::invalid_argument("tokenize: patch dimension " + std::to_string(patches.cols()) + " != " +
                                std::to_string(config_.patch_dim()));
  }
  return patch_proj_(patches);
}

template <typename T>
Var<T> Model<T>::encode_tokens(const Var<T>& tokens) const {
  const Index n = config_.patches();
  Var<T> x = config_.positional ? ag::add_tiled(tokens, positions_) : tokens;
  return (*encoder_)(x, n);
}

template <typename T>
Var<T> Model<T>::encode_image(const Var<T>& tokens) const {
  return ag::block_mean_rows(encode_tokens(tokens), config_.patches());
}

template <typename T>
Var<T> Model<T>::reconstruct(const Var<T>& corrupted, std::span<const Index> rows) const {
  auto hidden = encode_tokens(tokenize(corrupted));
  return ag::clamp(pixel_head_(ag::select_rows(hidden, rows)), T(0), T(1));
}

template <typename T>
Var<T> Model<T>::renewed_attention(const Matrix<T>& patches, const std::vector<lor::MaskPlan>& plans,
                                   Matrix<T>* similarity, Var<T>* reconstruction_l1) const {
  const Index n = config_.patches();
  const Index r = patches.rows();
  if (static_cast<Index>(plans.size()) * n != r) throw std::invalid_argument("one mask plan per image expected");
  const std::size_t rounds = plans.front().rounds.size();
  for (const auto& p : plans) {
    if (p.rounds.size() != rounds || p.patches != n) throw std::invalid_argument("mask plans disagree in shape");
  }
  const Index k = static_cast<Index>(rounds);
  Matrix<T> stacked(k * r, patches.cols());
  for (Index round = 0; round < k; ++round) stacked.middleRows(round * r, r) = patches;

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(k * r), 0);
  std::vector<Index> rows;
  std::vector<Index> targets;
  for (Index round = 0; round < k; ++round) {
    for (std::size_t b = 0; b < plans.size(); ++b) {
      for (int pos : plans[b].rounds[static_cast<std::size_t>(round)]) {
        const Index row = round * r + static_cast<Index>(b) * n + pos;
        mask[static_cast<std::size_t>(row)] = 1;
      }
    }
  }
  for (Index row = 0; row < k * r; ++row) {
    if (mask[static_cast<std::size_t>(row)]) {
      rows.push_back(row);
      targets.push_back(row % r);
    }
  }
  auto corrupted = ag::mask_rows(ag::constant<T>(stacked), mask_token_, mask);
  auto predicted = reconstruct(corrupted, rows);
  Matrix<T> originals(static_cast<Index>(rows.size()), patches.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) originals.row(static_cast<Index>(i)) = stacked.row(rows[i]);
  auto target = ag::constant<T>(std::move(originals));
  if (reconstruction_l1 != nullptr) {
    auto diff = ag::sub(predicted, target);
    const Matrix<T> ones = Matrix<T>::Ones(diff.rows(), diff.cols());
    const T scale = T(1) / static_cast<T>(diff.rows() * diff.cols());
    *reconstruction_l1 = ag::add(ag::weighted_sum(ag::relu(diff), ones, scale),
                                 ag::weighted_sum(ag::relu(ag::affine(diff, T(-1), T(0))), ones, scale));
  }
  auto sims = ag::cosine_affinity(predicted, target);
  auto mean = ag::scatter_mean(sims, targets, r);
  if (similarity != nullptr) *similarity = mean.value();
  return ag::affine(mean, T(-1), T(1));
}

template <typename T>
std::array<Var<T>, 4> Model<T>::prompts(const std::array<Matrix<T>, 4>& descriptions) const {
  std::array<Var<T>, 4> out;
  const Index b = descriptions[0].rows();
  for (std::size_t j = 0; j < 4; ++j) {
    if (config_.prompt_mode == PromptMode::global) {
      std::vector<Index> idx(static_cast<std::size_t>(b), static_cast<Index>(j));
      out[j] = ag::select_rows(global_prompts_, idx);
    } else {
      if (descriptions[j].cols() != config_.d_text) {
        throw std::invalid_argument("description embedding width differs from d_text");
      }
      out[j] = prompt_proj_[j](ag::constant<T>(descriptions[j]));
    }
  }
  return out;
}

template <typename T>
Var<T> Model<T>::prompt_sequence(const Var<T>& h, const std::array<Matrix<T>, 4>& descriptions) const {
  const Index b = h.rows();
  std::vector<Var<T>> parts;
  std::vector<Index> slots;
  parts.push_back(ag::tile_rows(cls_, b));
  slots.push_back(0);
  if (!config_.ablations.no_prompt) {
    auto s = prompts(descriptions);
    for (std::size_t j = 0; j < 4; ++j) {
      parts.push_back(s[j]);
      slots.push_back(static_cast<Index>(j + 1));
    }
  }
  parts.push_back(h);
  slots.push_back(5);
  parts.push_back(ag::tile_rows(sep_, b));
  slots.push_back(6);
  auto seq = ag::interleave_rows<T>(parts);
  return ag::add_tiled(seq, ag::select_rows(fusion_positions_, slots));
}

template <typename T>
Var<T> Model<T>::fuse(const Var<T>& sequence) const {
  const Index k = config_.sequence_length();
  if (sequence.rows() % k != 0) throw std::invalid_argument("fuse: sequence rows not a multiple of its length");
  auto out = fusion_(sequence, k);
  std::vector<Index> cls_rows;
  for (Index i = 0; i < sequence.rows() / k; ++i) cls_rows.push_back(i * k);
  return ag::select_rows(out, cls_rows);
}

template <typename T>
Var<T> Model<T>::classify(const Var<T>& fused) const {
  return classifier_(fused);
}

template <typename T>
std::vector<lor::MaskPlan> Model<T>::mask_plans(const Batch<T>& batch, std::uint64_t mask_seed) const {
  std::vector<lor::MaskPlan> plans;
  for (auto key : batch.keys) {
    plans.push_back(lor::sample_mask_rounds(config_.patches(), config_.mask_ratio, derive_seed(mask_seed, {key})));
  }
  return plans;
}

template <typename T>
DualOutput<T> Model<T>::forward_dual(const Batch<T>& batch, std::uint64_t mask_seed, bool with_original,
                                     bool with_reconstruction) const {
  const Index n = config_.patches();
  const Index b = batch.size();
  if (batch.patches.rows() != b * n) throw std::invalid_argument("batch patches do not match item count");
  DualOutput<T> out;
  auto tokens = tokenize(ag::constant<T>(batch.patches));
  const auto head = [&](const Var<T>& toks) { return classify(fuse(prompt_sequence(encode_image(toks), batch.descriptions))); };

  if (config_.ablations.no_lor) {
    out.attention = ag::constant<T>(Matrix<T>::Ones(b * n, 1));
    out.similarity = Matrix<T>::Zero(b * n, 1);
    out.logits_reconstructed = head(tokens);
    out.logits_original = out.logits_reconstructed;
    return out;
  }
  out.attention = renewed_attention(batch.patches, mask_plans(batch, mask_seed), &out.similarity,
                                    with_reconstruction ? &out.reconstruction_l1 : nullptr);
  out.logits_reconstructed = head(ag::row_scale(tokens, out.attention));
  if (with_original) out.logits_original = head(tokens);
  return out;
}

template <typename T>
void Model<T>::init_global_prompts(const std::array<Matrix<T>, 4>& mean_descriptions) {
  ag::NoGradGuard no_grad;
  for (std::size_t j = 0; j < 4; ++j) {
    auto s = prompt_proj_[j](ag::constant<T>(mean_descriptions[j]));
    global_prompts_.mutable_value().row(static_cast<Index>(j)) = s.value().row(0);
  }
}

template class Model<float>;
template class Model<double>;

Prediction topc_select(const std::vector<double>& probs, int c) {
  if (c < 1 || c > static_cast<int>(probs.size())) {
    throw std::invalid_argument("top-C needs 1 <= C <= " + std::to_string(probs.size()) + ", got " + std::to_string(c));
  }
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)]; });
  Prediction p;
  p.topc.assign(idx.begin(), idx.begin() + c);
  for (int i : p.topc) p.probs.push_back(probs[static_cast<std::size_t>(i)]);
  return p;
}

std::vector<double> softmax_row(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double mx = *std::max_element(out.begin(), out.end());
  double total = 0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace sticker
