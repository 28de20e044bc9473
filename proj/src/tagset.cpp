#include "sticker/tagset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace sticker::tagset {

std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

std::vector<std::string> strip_terms(const std::vector<std::string>& tokens,
                                     const std::set<std::string>& stop_words) {
  std::vector<std::string> out;
  for (const auto& tok : tokens) {
    std::string clean;
    for (unsigned char ch : tok) {
      if (ch >= 0x80 || std::isalnum(ch)) clean.push_back(static_cast<char>(std::tolower(ch)));
    }
    if (!clean.empty() && !stop_words.count(clean)) out.push_back(clean);
  }
  return out;
}

KeywordCorpus KeywordCorpus::from_lines(const std::vector<std::string>& lines, const Tokenizer& tokenize,
                                        const std::set<std::string>& stop_words) {
  KeywordCorpus corpus;
  for (const auto& line : lines) {
    auto terms = strip_terms(tokenize(line), stop_words);
    if (!terms.empty()) corpus.entries.push_back(std::move(terms));
  }
  return corpus;
}

TfidfMatrix tfidf_features(const KeywordCorpus& corpus) {
  if (corpus.entries.empty()) throw TagsetError("keyword corpus is empty");
  std::map<std::string, int> df;
  for (const auto& entry : corpus.entries) {
    if (entry.empty()) throw TagsetError("keyword entry without tokens");
    std::set<std::string> uniq(entry.begin(), entry.end());
    for (const auto& t : uniq) ++df[t];
  }
  if (df.empty()) throw TagsetError("vocabulary is empty after filtering");

  TfidfMatrix out;
  std::map<std::string, int> column;
  for (const auto& [term, _] : df) {
    column[term] = static_cast<int>(out.terms.size());
    out.terms.push_back(term);
  }
  const double n_docs = static_cast<double>(corpus.entries.size());
  for (const auto& term : out.terms) {
    out.idf.push_back(std::log((1.0 + n_docs) / (1.0 + df[term])) + 1.0);
  }
  out.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(corpus.entries.size()),
                                       static_cast<Eigen::Index>(out.terms.size()));
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    for (const auto& t : corpus.entries[i]) out.features(static_cast<Eigen::Index>(i), column[t]) += 1.0;
  }
  for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.features.cols(); ++j) out.features(i, j) *= out.idf[static_cast<std::size_t>(j)];
    const double norm = out.features.row(i).norm();
    if (norm == 0.0) throw TagsetError("keyword entry " + std::to_string(i) + " has an all-zero feature row");
    out.features.row(i) /= norm;
  }
  return out;
}

namespace {

struct Run {
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;
  double sse = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

Run lloyd(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Run run;
  run.centroids.resize(k, x.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  run.centroids.row(0) = x.row(first(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - run.centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      // Every point already coincides with a centre; any unused row will do.
      std::uniform_int_distribution<Eigen::Index> any(0, n - 1);
      pick = any(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0) break;
      }
      while (d2(pick) == 0.0 && pick > 0) --pick;
    }
    run.centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (x.row(i) - run.centroids.row(c)).squaredNorm());
  }

  run.assignments.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - run.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sse += best_d;
      if (run.assignments[static_cast<std::size_t>(i)] != best) {
        run.assignments[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    run.history.push_back(sse);
    run.iterations = iter + 1;
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.assignments[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(run.assignments[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      // Empty clusters keep their previous centre.
      if (counts[static_cast<std::size_t>(c)] > 0) run.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  run.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.sse += (x.row(i) - run.centroids.row(run.assignments[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return run;
}

}  // namespace

ClusterResult kmeans_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed, int restarts) {
  if (k <= 0) throw TagsetError("k must be positive");
  if (k > features.rows()) throw TagsetError("k exceeds the number of rows");
  if (restarts < 1) throw TagsetError("restarts must be at least 1");
  std::mt19937_64 rng(seed);
  Run best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Run run = lloyd(features, k, rng);
    if (!have || run.sse < best.sse) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterResult out;
  out.k = k;
  out.assignments = std::move(best.assignments);
  out.centroids = std::move(best.centroids);
  out.sse = best.sse;
  out.iterations = best.iterations;
  out.sse_history = std::move(best.history);
  return out;
}

int knee_index(const std::vector<CurvePoint>& curve) {
  if (curve.size() < 3) throw TagsetError("elbow search needs at least 3 sweep points");
  // Normalize both axes so the distance is scale-free.
  const double k0 = curve.front().k;
  const double k1 = curve.back().k;
  double lo = curve.front().sse;
  double hi = curve.front().sse;
  for (const auto& p : curve) {
    lo = std::min(lo, p.sse);
    hi = std::max(hi, p.sse);
  }
  const double span = hi - lo;
  if (span <= 0.0) return -1;
  const auto nx = [&](double k) { return (k - k0) / (k1 - k0); };
  const auto ny = [&](double s) { return (s - lo) / span; };
  const double ax = nx(curve.front().k), ay = ny(curve.front().sse);
  const double bx = nx(curve.back().k), by = ny(curve.back().sse);
  const double len = std::hypot(bx - ax, by - ay);
  int best = -1;
  double best_d = 1e-9;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double px = nx(curve[i].k), py = ny(curve[i].sse);
    const double d = std::abs((bx - ax) * (ay - py) - (ax - px) * (by - ay)) / len;
    if (d > best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

std::vector<CurvePoint> sweep(const std::function<double(int)>& sse_of_k, int lo, int hi, int step) {
  std::vector<CurvePoint> curve;
  for (int k = lo; k <= hi; k += step) curve.push_back({k, sse_of_k(k)});
  if (curve.back().k != hi) curve.push_back({hi, sse_of_k(hi)});
  return curve;
}

}  // namespace

ElbowResult elbow_search(const std::function<double(int)>& sse_of_k, int k_min, int k_max, int coarse_step) {
  if (k_min >= k_max) throw TagsetError("elbow search needs k_min < k_max");
  if (coarse_step < 1) throw TagsetError("coarse step must be at least 1");
  ElbowResult out;
  out.coarse_curve = sweep(sse_of_k, k_min, k_max, coarse_step);
  if (out.coarse_curve.size() < 3) throw TagsetError("coarse elbow phase has fewer than 3 sweep points");
  const int ci = knee_index(out.coarse_curve);
  if (ci < 0) {
    out.no_knee = true;
    out.selected_k = out.coarse_k = out.fine_lo = out.fine_hi = k_min;
    return out;
  }
  out.coarse_k = out.coarse_curve[static_cast<std::size_t>(ci)].k;
  if (coarse_step == 1) {
    out.selected_k = out.fine_lo = out.fine_hi = out.coarse_k;
    return out;
  }
  out.fine_lo = out.coarse_k;
  out.fine_hi = std::min(out.coarse_k + coarse_step, k_max);
  out.fine_curve = sweep(sse_of_k, out.fine_lo, out.fine_hi, 1);
  if (out.fine_curve.size() < 3) throw TagsetError("fine elbow phase has fewer than 3 sweep points");
  const int fi = knee_index(out.fine_curve);
  if (fi < 0) {
    out.no_knee = true;
    out.selected_k = out.fine_lo;
  } else {
    out.selected_k = out.fine_curve[static_cast<std::size_t>(fi)].k;
  }
  return out;
}

ElbowResult elbow_search(const Eigen::MatrixXd& features, int k_min, int k_max, int coarse_step,
                         std::uint64_t seed, int restarts) {
  if (k_max > features.rows()) throw TagsetError("k_max exceeds the number of rows");
  return elbow_search([&](int k) { return kmeans_cluster(features, k, seed, restarts).sse; }, k_min, k_max,
                      coarse_step);
}

MajorityResult majority_tag(const std::array<std::set<std::string>, 3>& annotations) {
  std::map<std::string, int> votes;
  for (const auto& set : annotations) {
    for (const auto& t : set) ++votes[t];
  }
  MajorityResult out;
  for (const auto& [tag, n] : votes) {
    if (n >= 2) out.tags.insert(tag);
  }
  out.needs_discussion = out.tags.empty();
  return out;
}

std::vector<std::vector<std::string>> top_terms(const ClusterResult& clusters,
                                                const std::vector<std::string>& terms, int per_cluster) {
  std::vector<std::vector<std::string>> out;
  for (Eigen::Index c = 0; c < clusters.centroids.rows(); ++c) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(clusters.centroids.cols()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return clusters.centroids(c, a) > clusters.centroids(c, b); });
    std::vector<std::string> names;
    for (int i = 0; i < per_cluster && i < static_cast<int>(idx.size()); ++i) {
      if (clusters.centroids(c, idx[static_cast<std::size_t>(i)]) <= 0.0) break;
      names.push_back(terms[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
    out.push_back(std::move(names));
  }
  return out;
}

}  // namespace sticker::tagset
