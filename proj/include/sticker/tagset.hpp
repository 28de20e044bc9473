#pragma once

// Tag-vocabulary construction: TF-IDF features over keyword entries, k-means
// clustering, a two-phase elbow search for k, and the three-annotator
// majority rule.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker::tagset {

class TagsetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Tokenizer = std::function<std::vector<std::string>(const std::string&)>;

std::vector<std::string> whitespace_tokenize(const std::string& text);

/// Drops stop words and strips non-alphanumeric characters (UTF-8 bytes >= 0x80 are kept).
std::vector<std::string> strip_terms(const std::vector<std::string>& tokens,
                                     const std::set<std::string>& stop_words);

struct KeywordCorpus {
  std::vector<std::vector<std::string>> entries;

  static KeywordCorpus from_lines(const std::vector<std::string>& lines, const Tokenizer& tokenize,
                                  const std::set<std::string>& stop_words = {});
};

struct TfidfMatrix {
  Eigen::MatrixXd features;        // entries x terms, rows L2-normalized
  std::vector<std::string> terms;  // lexicographic
  std::vector<double> idf;
};

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1, tf = raw count.
TfidfMatrix tfidf_features(const KeywordCorpus& corpus);

struct ClusterResult {
  int k = 0;
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;  // k x dims
  double sse = 0.0;
  int iterations = 0;
  std::vector<double> sse_history;  // per Lloyd iteration, winning restart
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by SSE (lowest
/// restart index wins ties). Stops on stable assignments or 300 iterations.
ClusterResult kmeans_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed, int restarts = 4);

struct CurvePoint {
  int k;
  double sse;
};

struct ElbowResult {
  int selected_k = 0;
  int coarse_k = 0;
  int fine_lo = 0;
  int fine_hi = 0;
  bool no_knee = false;
  std::vector<CurvePoint> coarse_curve;
  std::vector<CurvePoint> fine_curve;
};

/// Index of the point farthest from the chord joining the curve's endpoints;
/// nullopt-like -1 when the curve is (numerically) on the chord.
int knee_index(const std::vector<CurvePoint>& curve);

/// Two-phase elbow search: sweep [k_min, k_max] at coarse_step, take the knee
/// k*, then sweep [k*, k* + coarse_step] at step 1. A coarse_step of 1 makes
/// the coarse sweep final.
ElbowResult elbow_search(const std::function<double(int)>& sse_of_k, int k_min, int k_max, int coarse_step);

ElbowResult elbow_search(const Eigen::MatrixXd& features, int k_min, int k_max, int coarse_step,
                         std::uint64_t seed, int restarts = 4);

struct MajorityResult {
  std::set<std::string> tags;
  bool needs_discussion = false;
};

/// Tags named by at least two of the three annotators.
MajorityResult majority_tag(const std::array<std::set<std::string>, 3>& annotations);

/// Highest-weight terms of each centroid, for naming worksheets.
std::vector<std::vector<std::string>> top_terms(const ClusterResult& clusters,
                                                const std::vector<std::string>& terms, int per_cluster);

}  // namespace sticker::tagset
