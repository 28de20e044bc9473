#pragma once

// Multi-label evaluation: per-class and overall precision, recall and F1
// under top-k selection and probability thresholding.

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker::metrics {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using PredictionSets = std::vector<std::vector<int>>;

/// The k largest entries of each row, ties to the lower id. Sets are sorted.
PredictionSets select_topk(const Eigen::MatrixXd& probs, int k);

/// Entries strictly greater than t.
PredictionSets select_threshold(const Eigen::MatrixXd& probs, double t);

struct ConfusionCounts {
  std::vector<long> tp;
  std::vector<long> fp;
  std::vector<long> fn;
};

ConfusionCounts confusion_counts(const PredictionSets& preds, const PredictionSets& truths, int m);

/// All values are percentages in [0, 100].
struct MetricValues {
  double cp = 0, cr = 0, cf1 = 0, op = 0, orc = 0, of1 = 0;
};

MetricValues aggregate(const ConfusionCounts& counts);

struct MetricsReport {
  std::map<int, MetricValues> per_k;
  MetricValues threshold_mode;
  double threshold = 0.5;
  int n_eval = 0;
};

MetricsReport report(const Eigen::MatrixXd& probs, const PredictionSets& truths, const std::vector<int>& ks = {1, 3, 5},
                     double threshold = 0.5);

/// Percentages rounded to two decimals.
nlohmann::json to_json(const MetricsReport& report);

/// Binary probability dump: one JSON header line {n, m, vocab_hash, labels},
/// then n*m little-endian float64 values in row-major order.
struct ProbabilityDump {
  Eigen::MatrixXd probs;
  PredictionSets truths;
  std::string vocab_hash;
};

void write_probability_dump(const std::filesystem::path& path, const ProbabilityDump& dump);
ProbabilityDump read_probability_dump(const std::filesystem::path& path);

}  // namespace sticker::metrics
