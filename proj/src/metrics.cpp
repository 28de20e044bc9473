#include "sticker/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace sticker::metrics {

PredictionSets select_topk(const Eigen::MatrixXd& probs, int k) {
  if (k < 1 || k > probs.cols()) {
    throw MetricsError("top-k needs 1 <= k <= m=" + std::to_string(probs.cols()) + ", got " + std::to_string(k));
  }
  PredictionSets out(static_cast<std::size_t>(probs.rows()));
  std::vector<int> idx(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs(i, a) > probs(i, b); });
    auto& row = out[static_cast<std::size_t>(i)];
    row.assign(idx.begin(), idx.begin() + k);
    std::sort(row.begin(), row.end());
  }
  return out;
}

PredictionSets select_threshold(const Eigen::MatrixXd& probs, double t) {
  if (!(t > 0.0 && t < 1.0)) throw MetricsError("threshold must lie in (0, 1)");
  PredictionSets out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      if (probs(i, j) > t) out[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
    }
  }
  return out;
}

ConfusionCounts confusion_counts(const PredictionSets& preds, const PredictionSets& truths, int m) {
  if (preds.size() != truths.size()) throw MetricsError("prediction and truth counts differ");
  ConfusionCounts c;
  c.tp.assign(static_cast<std::size_t>(m), 0);
  c.fp.assign(static_cast<std::size_t>(m), 0);
  c.fn.assign(static_cast<std::size_t>(m), 0);
  std::vector<char> truth(static_cast<std::size_t>(m));
  std::vector<char> pred(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::fill(truth.begin(), truth.end(), 0);
    std::fill(pred.begin(), pred.end(), 0);
    for (int j : truths[i]) {
      if (j < 0 || j >= m) throw MetricsError("truth id out of range");
      truth[static_cast<std::size_t>(j)] = 1;
    }
    for (int j : preds[i]) {
      if (j < 0 || j >= m) throw MetricsError("prediction id out of range");
      pred[static_cast<std::size_t>(j)] = 1;
    }
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (pred[j] && truth[j]) ++c.tp[j];
      if (pred[j] && !truth[j]) ++c.fp[j];
      if (!pred[j] && truth[j]) ++c.fn[j];
    }
  }
  return c;
}

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
double harmonic(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

MetricValues aggregate(const ConfusionCounts& c) {
  const std::size_t m = c.tp.size();
  MetricValues v;
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < m; ++j) {
    v.cp += ratio(static_cast<double>(c.tp[j]), static_cast<double>(c.tp[j] + c.fp[j]));
    v.cr += ratio(static_cast<double>(c.tp[j]), static_cast<double>(c.tp[j] + c.fn[j]));
    tp += static_cast<double>(c.tp[j]);
    fp += static_cast<double>(c.fp[j]);
    fn += static_cast<double>(c.fn[j]);
  }
  if (m > 0) {
    v.cp /= static_cast<double>(m);
    v.cr /= static_cast<double>(m);
  }
  v.cf1 = harmonic(v.cp, v.cr);
  v.op = ratio(tp, tp + fp);
  v.orc = ratio(tp, tp + fn);
  v.of1 = harmonic(v.op, v.orc);
  for (double* x : {&v.cp, &v.cr, &v.cf1, &v.op, &v.orc, &v.of1}) *x *= 100.0;
  return v;
}

MetricsReport report(const Eigen::MatrixXd& probs, const PredictionSets& truths, const std::vector<int>& ks,
                     double threshold) {
  if (static_cast<Eigen::Index>(truths.size()) != probs.rows()) throw MetricsError("probability rows differ from truths");
  const int m = static_cast<int>(probs.cols());
  MetricsReport r;
  r.threshold = threshold;
  r.n_eval = static_cast<int>(probs.rows());
  for (int k : ks) r.per_k[k] = aggregate(confusion_counts(select_topk(probs, std::min(k, m)), truths, m));
  r.threshold_mode = aggregate(confusion_counts(select_threshold(probs, threshold), truths, m));
  return r;
}

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

nlohmann::json values_json(const MetricValues& v) {
  return {{"CP", round2(v.cp)}, {"CR", round2(v.cr)}, {"CF1", round2(v.cf1)},
          {"OP", round2(v.op)}, {"OR", round2(v.orc)}, {"OF1", round2(v.of1)}};
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json out;
  out["n_eval"] = r.n_eval;
  nlohmann::json topk = nlohmann::json::object();
  for (const auto& [k, v] : r.per_k) topk["top" + std::to_string(k)] = values_json(v);
  out["topk"] = topk;
  out["threshold"] = {{"t", r.threshold}, {"values", values_json(r.threshold_mode)}};
  return out;
}

void write_probability_dump(const std::filesystem::path& path, const ProbabilityDump& dump) {
  if (static_cast<Eigen::Index>(dump.truths.size()) != dump.probs.rows()) {
    throw MetricsError("probability dump needs one truth set per row");
  }
  nlohmann::json header = {{"n", dump.probs.rows()},
                           {"m", dump.probs.cols()},
                           {"vocab_hash", dump.vocab_hash},
                           {"labels", dump.truths}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < dump.probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < dump.probs.cols(); ++j) {
      const double v = dump.probs(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ProbabilityDump read_probability_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  ProbabilityDump dump;
  const auto n = header.at("n").get<Eigen::Index>();
  const auto m = header.at("m").get<Eigen::Index>();
  dump.vocab_hash = header.at("vocab_hash").get<std::string>();
  dump.truths = header.at("labels").get<PredictionSets>();
  dump.probs.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      dump.probs(i, j) = v;
    }
  }
  if (!in) throw std::runtime_error("truncated probability dump " + path.string());
  return dump;
}

}  // namespace sticker::metrics
