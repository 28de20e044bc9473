#pragma once

// Multi-positive softmax loss, the confidence penalty between the two paths,
// and their sum.

#include "sticker/autograd.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace sticker::objective {

using ag::Matrix;
using ag::Var;

class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class PenaltyMode { signed_diff, hinge };

PenaltyMode parse_penalty_mode(const std::string& text);
std::string to_string(PenaltyMode mode);

struct LossOptions {
  PenaltyMode penalty_mode = PenaltyMode::signed_diff;
  bool no_penalty = false;
  /// Treat the original path as a constant target.
  bool stop_grad_original = false;
};

struct LossBreakdown {
  double main = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

template <typename T>
struct LossTerms {
  Var<T> main;
  Var<T> penalty;
  Var<T> total;

  LossBreakdown breakdown() const {
    return {static_cast<double>(main.scalar()), static_cast<double>(penalty.scalar()),
            static_cast<double>(total.scalar())};
  }
};

/// n x m indicator of the positive tags; throws on empty sets or bad ids.
template <typename T>
Matrix<T> label_matrix(const std::vector<std::vector<int>>& labels, Eigen::Index m);

/// Differentiable losses from the logits of both paths. When both logits are
/// the same node the penalty is exactly zero.
template <typename T>
LossTerms<T> total_loss(const Var<T>& logits_reconstructed, const Var<T>& logits_original,
                        const std::vector<std::vector<int>>& labels, const LossOptions& options = {});

template <typename T>
Var<T> main_loss(const Var<T>& logits, const std::vector<std::vector<int>>& labels);

template <typename T>
Var<T> penalty_loss(const Var<T>& probs_reconstructed, const Var<T>& probs_original,
                    const std::vector<std::vector<int>>& labels, PenaltyMode mode);

/// Value-level forms over probability matrices (n x m, rows sum to 1).
double main_loss_value(const Eigen::MatrixXd& logits, const std::vector<std::vector<int>>& labels);
double penalty_value(const Eigen::MatrixXd& probs_reconstructed, const Eigen::MatrixXd& probs_original,
                     const std::vector<std::vector<int>>& labels, PenaltyMode mode);
LossBreakdown total_value(const Eigen::MatrixXd& logits_reconstructed, const Eigen::MatrixXd& logits_original,
                          const std::vector<std::vector<int>>& labels, const LossOptions& options = {});

}  // namespace sticker::objective
