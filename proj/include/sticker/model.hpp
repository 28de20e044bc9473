#pragma once

// The dual-path tagger: patch tokens, local re-attention, image encoding, the
// [CLS] S1..S4 h [SEP] prompt sequence, fusion and the softmax tag classifier.

#include "sticker/autograd.hpp"
#include "sticker/lor.hpp"
#include "sticker/nn.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker {

using ag::Index;
using ag::Matrix;
using ag::Var;

enum class PromptMode { per_sample, global };

struct Ablations {
  bool no_lor = false;
  bool no_prompt = false;
  bool no_penalty = false;
};

struct ModelConfig {
  int image_height = 64;
  int image_width = 64;
  int channels = 3;
  int patch = 16;
  int d_model = 128;
  int layers = 4;
  int heads = 4;
  int ffn_mult = 4;
  int fusion_layers = 2;
  int d_text = 64;
  int num_tags = 12;
  double mask_ratio = 0.4;
  bool positional = true;
  std::string encoder = "transformer";
  PromptMode prompt_mode = PromptMode::per_sample;
  Ablations ablations;
  std::uint64_t init_seed = 0;

  int patches() const { return (image_height / patch) * (image_width / patch); }
  int patch_dim() const { return patch * patch * channels; }
  /// 7 with prompts, 3 without.
  int sequence_length() const { return ablations.no_prompt ? 3 : 7; }
  void validate() const;
};

/// Maps stacked patch tokens (batch * N rows) to contextual hidden states.
template <typename T>
class PatchEncoder {
 public:
  virtual ~PatchEncoder() = default;
  virtual Var<T> operator()(const Var<T>& tokens, Index seq_len) const = 0;
};

/// Plain ViT-style stack. Other backbones plug in through PatchEncoder.
template <typename T>
class TransformerPatchEncoder : public PatchEncoder<T> {
 public:
  TransformerPatchEncoder(nn::ParameterSet<T>& params, const std::string& name, const nn::TransformerShape& shape,
                          nn::Initializer& init)
      : encoder_(params, name, shape, init) {}
  Var<T> operator()(const Var<T>& tokens, Index seq_len) const override { return encoder_(tokens, seq_len); }

 private:
  nn::TransformerEncoder<T> encoder_;
};

/// One training or evaluation batch, already patchified.
template <typename T>
struct Batch {
  Matrix<T> patches;                       // (B * N) x D
  std::array<Matrix<T>, 4> descriptions;   // each B x d_text (content, style, role, action)
  std::vector<std::vector<int>> labels;    // B tag-id sets
  std::vector<std::uint64_t> keys;         // per-item mask-seed keys

  Index size() const { return static_cast<Index>(keys.size()); }
};

template <typename T>
struct DualOutput {
  Var<T> logits_reconstructed;  // B x m
  Var<T> logits_original;       // B x m; same node as reconstructed under no_lor
  Var<T> attention;             // (B * N) x 1 renewed weights r_hat
  Matrix<T> similarity;         // (B * N) x 1 raw r
  Var<T> reconstruction_l1;     // 1 x 1, only when requested and LoR is active
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet<T>& parameters() { return params_; }
  const nn::ParameterSet<T>& parameters() const { return params_; }

  /// Per-patch linear projection D -> d_model.
  Var<T> tokenize(const Var<T>& patches) const;

  /// Positions are added here, then the patch encoder runs over each image.
  Var<T> encode_tokens(const Var<T>& tokens) const;

  /// Mean-pooled image representation h, B x d_model.
  Var<T> encode_image(const Var<T>& tokens) const;

  /// Predicted pixels for the listed rows of a corrupted patch stack, clamped to [0, 1].
  Var<T> reconstruct(const Var<T>& corrupted, std::span<const Index> rows) const;

  /// Renewed attention for each stacked patch; plans[b] covers image b.
  /// When `reconstruction_l1` is given it receives the mean absolute pixel
  /// error over the masked rows.
  Var<T> renewed_attention(const Matrix<T>& patches, const std::vector<lor::MaskPlan>& plans,
                           Matrix<T>* similarity = nullptr, Var<T>* reconstruction_l1 = nullptr) const;

  /// The prompt slots S_1..S_4 for a batch, each B x d_model.
  std::array<Var<T>, 4> prompts(const std::array<Matrix<T>, 4>& descriptions) const;

  /// Token sequence [CLS] S_1..S_4 h [SEP] (or [CLS] h [SEP]) stacked per item.
  Var<T> prompt_sequence(const Var<T>& h, const std::array<Matrix<T>, 4>& descriptions) const;

  /// Fusion encoder output at the [CLS] position, B x d_model.
  Var<T> fuse(const Var<T>& sequence) const;

  Var<T> classify(const Var<T>& fused) const;

  std::vector<lor::MaskPlan> mask_plans(const Batch<T>& batch, std::uint64_t mask_seed) const;

  /// Reconstructed and original paths. The original path skips masking; with
  /// no_lor both paths are the same graph.
  DualOutput<T> forward_dual(const Batch<T>& batch, std::uint64_t mask_seed, bool with_original = true,
                             bool with_reconstruction = false) const;

  /// Rebuilds global prompt slots from mean description embeddings.
  void init_global_prompts(const std::array<Matrix<T>, 4>& mean_descriptions);

  void set_ablations(const Ablations& ablations) { config_.ablations = ablations; }

 private:
  ModelConfig config_;
  nn::ParameterSet<T> params_;
  nn::Linear<T> patch_proj_;
  Var<T> positions_;
  std::unique_ptr<PatchEncoder<T>> encoder_;
  Var<T> mask_token_;
  nn::Linear<T> pixel_head_;
  std::array<nn::Linear<T>, 4> prompt_proj_;
  Var<T> global_prompts_;  // 4 x d_model, used in PromptMode::global
  Var<T> cls_;
  Var<T> sep_;
  Var<T> fusion_positions_;  // 7 x d_model
  nn::TransformerEncoder<T> fusion_;
  nn::Linear<T> classifier_;
};

struct Prediction {
  std::vector<int> topc;
  std::vector<double> probs;
};

/// Ids of the C largest probabilities, ties to the lower id.
Prediction topc_select(const std::vector<double>& probs, int c);

/// Row-wise softmax in double.
std::vector<double> softmax_row(std::span<const double> logits);

}  // namespace sticker
