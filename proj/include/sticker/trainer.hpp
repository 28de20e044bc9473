#pragma once

// Training loop, AdamW, evaluation and checkpoint orchestration.

#include "sticker/adg.hpp"
#include "sticker/data.hpp"
#include "sticker/metrics.hpp"
#include "sticker/model.hpp"
#include "sticker/objective.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker::trainer {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 3e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  int eval_batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 7;
  objective::PenaltyMode penalty_mode = objective::PenaltyMode::signed_diff;
  bool stop_grad_original = false;
  /// Evaluate on the original path instead of the reconstructed one.
  bool eval_original = false;
  /// Weight of the auxiliary L1 pixel-reconstruction loss (0 disables it).
  double reconstruction_weight = 0.0;
  std::vector<int> ks{1, 3, 5};
  double threshold = 0.5;
  ModelConfig model;
  adg::TextEncoderConfig text;
  /// Free-form provenance (data paths, split seed) echoed into sidecars.
  nlohmann::json data = nlohmann::json::object();

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// One sticker ready for the model.
struct Example {
  std::string id;
  std::uint64_t key = 0;
  Matrix<float> patches;       // N x D
  Matrix<float> descriptions;  // 4 x d_text
  std::vector<int> tags;
};

struct PreparedSplit {
  std::vector<Example> examples;  // sorted by id
  TagVocabulary vocabulary;
};

/// Stable 64-bit key of a sticker id, used to seed its masks.
std::uint64_t item_key(const std::string& id);

/// Patchifies (resizing when needed) and embeds descriptions. Every item must
/// have a description; otherwise the error lists the missing ids.
PreparedSplit prepare(const Dataset& dataset, const adg::DescriptionCache& descriptions,
                      const adg::TextEncoder& encoder, const ModelConfig& config);

Batch<float> make_batch(const PreparedSplit& split, const std::vector<std::size_t>& indices);

class AdamW {
 public:
  AdamW(nn::ParameterSet<float>& params, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  /// Applies one update from the accumulated gradients, then clears them.
  void step();
  long steps() const { return t_; }

 private:
  nn::ParameterSet<float>& params_;
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Matrix<float>> m_;
  std::vector<Matrix<float>> v_;
};

struct EvalResult {
  Eigen::MatrixXd probs;
  metrics::PredictionSets truths;
  metrics::MetricsReport report;
};

/// Batched inference (fixed mask seed) followed by the metrics report.
EvalResult evaluate(const Model<float>& model, const PreparedSplit& split, const TrainConfig& config);

struct EpochSummary {
  int epoch = 0;
  double main = 0, penalty = 0, total = 0;
  metrics::MetricsReport val;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  double initial_loss = 0.0;  // mean total over the first few steps
  int best_epoch = 0;
  double best_cf1 = -1.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path log_path;
};

/// Writes train_log.jsonl, config.json, best.ckpt and last.ckpt (with sidecars)
/// and val_probs.bin for the best epoch under out_dir. Progress lines with
/// timings go to `progress` only, so the log stays reproducible.
TrainResult train(const TrainConfig& config, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

nlohmann::json checkpoint_sidecar(const TrainConfig& config, const TagVocabulary& vocabulary, int epoch);

struct LoadedModel {
  TrainConfig config;
  TagVocabulary vocabulary;
  std::unique_ptr<Model<float>> model;
};

LoadedModel load_model(const std::filesystem::path& checkpoint_path);

/// Throws TrainError when the split's vocabulary differs from the checkpoint's.
void check_vocabulary(const LoadedModel& loaded, const TagVocabulary& vocabulary);

}  // namespace sticker::trainer
