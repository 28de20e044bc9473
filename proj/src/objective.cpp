#include "sticker/objective.hpp"

#include <algorithm>
#include <cmath>

namespace sticker::objective {

PenaltyMode parse_penalty_mode(const std::string& text) {
  if (text == "signed") return PenaltyMode::signed_diff;
  if (text == "hinge") return PenaltyMode::hinge;
  throw LossError("penalty mode must be \"signed\" or \"hinge\", got \"" + text + "\"");
}

std::string to_string(PenaltyMode mode) { return mode == PenaltyMode::hinge ? "hinge" : "signed"; }

template <typename T>
Matrix<T> label_matrix(const std::vector<std::vector<int>>& labels, Eigen::Index m) {
  Matrix<T> y = Matrix<T>::Zero(static_cast<Eigen::Index>(labels.size()), m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw LossError("item " + std::to_string(i) + " has an empty label set");
    for (int j : labels[i]) {
      if (j < 0 || j >= m) throw LossError("tag id " + std::to_string(j) + " out of range for m=" + std::to_string(m));
      y(static_cast<Eigen::Index>(i), j) = T(1);
    }
  }
  return y;
}

template <typename T>
Var<T> main_loss(const Var<T>& logits, const std::vector<std::vector<int>>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) throw LossError("batch size mismatch in main loss");
  const auto y = label_matrix<T>(labels, logits.cols());
  return ag::weighted_sum(ag::log_softmax(logits), y, T(-1) / static_cast<T>(labels.size()));
}

template <typename T>
Var<T> penalty_loss(const Var<T>& probs_reconstructed, const Var<T>& probs_original,
                    const std::vector<std::vector<int>>& labels, PenaltyMode mode) {
  if (probs_reconstructed.rows() != probs_original.rows() || probs_reconstructed.cols() != probs_original.cols() ||
      static_cast<Eigen::Index>(labels.size()) != probs_reconstructed.rows()) {
    throw LossError("batch size mismatch in penalty");
  }
  const auto y = label_matrix<T>(labels, probs_reconstructed.cols());
  const T scale = T(1) / static_cast<T>(labels.size());
  if (mode == PenaltyMode::hinge) {
    return ag::weighted_sum(ag::relu(ag::sub(probs_original, probs_reconstructed)), y, scale);
  }
  return ag::weighted_sum(ag::sub(probs_reconstructed, probs_original), y, -scale);
}

template <typename T>
LossTerms<T> total_loss(const Var<T>& logits_reconstructed, const Var<T>& logits_original,
                        const std::vector<std::vector<int>>& labels, const LossOptions& options) {
  LossTerms<T> out;
  out.main = main_loss(logits_reconstructed, labels);
  const bool same = !logits_original.defined() || logits_original.node() == logits_reconstructed.node();
  if (options.no_penalty || same) {
    if (!options.no_penalty) label_matrix<T>(labels, logits_reconstructed.cols());
    out.penalty = ag::constant<T>(Matrix<T>::Zero(1, 1));
    out.total = out.main;
    return out;
  }
  const auto original = options.stop_grad_original ? ag::detach(logits_original) : logits_original;
  out.penalty = penalty_loss(ag::softmax(logits_reconstructed), ag::softmax(original), labels, options.penalty_mode);
  out.total = ag::add(out.main, out.penalty);
  return out;
}

namespace {

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

double main_loss_value(const Eigen::MatrixXd& logits, const std::vector<std::vector<int>>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) throw LossError("batch size mismatch in main loss");
  const auto y = label_matrix<double>(labels, logits.cols());
  const auto ls = log_softmax_rows(logits);
  return -(y.array() * ls.array()).sum() / static_cast<double>(labels.size());
}

double penalty_value(const Eigen::MatrixXd& probs_reconstructed, const Eigen::MatrixXd& probs_original,
                     const std::vector<std::vector<int>>& labels, PenaltyMode mode) {
  if (probs_reconstructed.rows() != probs_original.rows() || probs_reconstructed.cols() != probs_original.cols() ||
      static_cast<Eigen::Index>(labels.size()) != probs_reconstructed.rows()) {
    throw LossError("batch size mismatch in penalty");
  }
  const auto y = label_matrix<double>(labels, probs_reconstructed.cols());
  const Eigen::ArrayXXd diff = probs_reconstructed.array() - probs_original.array();
  const double n = static_cast<double>(labels.size());
  if (mode == PenaltyMode::hinge) return (y.array() * (-diff).max(0.0)).sum() / n;
  return -(y.array() * diff).sum() / n;
}

LossBreakdown total_value(const Eigen::MatrixXd& logits_reconstructed, const Eigen::MatrixXd& logits_original,
                          const std::vector<std::vector<int>>& labels, const LossOptions& options) {
  LossBreakdown out;
  out.main = main_loss_value(logits_reconstructed, labels);
  if (!options.no_penalty) {
    const Eigen::MatrixXd pr = log_softmax_rows(logits_reconstructed).array().exp().matrix();
    const Eigen::MatrixXd po = log_softmax_rows(logits_original).array().exp().matrix();
    out.penalty = penalty_value(pr, po, labels, options.penalty_mode);
  }
  out.total = out.main + out.penalty;
  return out;
}

#define STICKER_OBJECTIVE_INSTANTIATE(T)                                                                        \
  template Matrix<T> label_matrix<T>(const std::vector<std::vector<int>>&, Eigen::Index);                      \
  template Var<T> main_loss<T>(const Var<T>&, const std::vector<std::vector<int>>&);                          \
  template Var<T> penalty_loss<T>(const Var<T>&, const Var<T>&, const std::vector<std::vector<int>>&,         \
                                  PenaltyMode);                                                                \
  template LossTerms<T> total_loss<T>(const Var<T>&, const Var<T>&, const std::vector<std::vector<int>>&,     \
                                      const LossOptions&);

STICKER_OBJECTIVE_INSTANTIATE(float)
STICKER_OBJECTIVE_INSTANTIATE(double)

}  // namespace sticker::objective
