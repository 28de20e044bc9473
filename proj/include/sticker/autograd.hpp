#pragma once

// Reverse-mode automatic differentiation over row-major Eigen matrices.
//
// Every value is a 2-D matrix. Graphs are recorded eagerly: each op returns a
// Var whose node remembers its parents and a closure that pushes the node's
// gradient back into them. Var<float> drives training; Var<double> drives the
// finite-difference checks.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace sticker::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix<T>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

/// Disables graph recording for its lifetime (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Matrix<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var parameter(Matrix<T> value) { return Var(std::move(value), true); }

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  T scalar() const { return node_->value(0, 0); }

  /// Back-propagates from this 1x1 node into every reachable leaf.
  void backward() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Matrix<T> value) {
  return Var<T>(std::move(value), false);
}

// Stops gradient flow; the result shares the value but has no parents.
template <typename T>
Var<T> detach(const Var<T>& x);

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

// x * weight + bias, bias broadcast over rows (bias is 1 x out).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

// alpha * x + beta, elementwise.
template <typename T>
Var<T> affine(const Var<T>& x, T alpha, T beta);

// Adds `pattern` (k x d) to every consecutive block of k rows of x.
template <typename T>
Var<T> add_tiled(const Var<T>& x, const Var<T>& pattern);

// Repeats the rows of x `times` times (result is times*rows x cols).
template <typename T>
Var<T> tile_rows(const Var<T>& x, Index times);

// Scales row i of x by w(i, 0).
template <typename T>
Var<T> row_scale(const Var<T>& x, const Var<T>& w);

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

// tanh approximation.
template <typename T>
Var<T> gelu(const Var<T>& x);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi);

// Scaled dot-product attention over independent sequences of `seq_len` rows.
// qkv holds [Q | K | V] column blocks, each d = cols/3 wide, split into
// `heads` heads. Returns rows x d.
template <typename T>
Var<T> multi_head_attention(const Var<T>& qkv, Index heads, Index seq_len);

// Mean over each consecutive block of `block` rows.
template <typename T>
Var<T> block_mean_rows(const Var<T>& x, Index block);

// parts[k] is B x d; result row b*K + k is parts[k] row b.
template <typename T>
Var<T> interleave_rows(std::span<const Var<T>> parts);

template <typename T>
Var<T> select_rows(const Var<T>& x, std::span<const Index> rows);

// Rows with mask[i] != 0 are replaced by `token` (1 x cols).
template <typename T>
Var<T> mask_rows(const Var<T>& x, const Var<T>& token, std::span<const std::uint8_t> mask);

// Per-row (1 + cos(a_i, b_i)) / 2, clamped to [0, 1]; 0 where either row is zero.
template <typename T>
Var<T> cosine_affinity(const Var<T>& a, const Var<T>& b);

// values is M x 1; returns out_rows x 1 where row r is the mean of the values
// whose target is r. Every output row must receive at least one value.
template <typename T>
Var<T> scatter_mean(const Var<T>& values, std::span<const Index> targets, Index out_rows);

template <typename T>
Var<T> log_softmax(const Var<T>& x);

template <typename T>
Var<T> softmax(const Var<T>& x);

template <typename T>
Var<T> exp(const Var<T>& x);

// scale * sum(x .* weights), weights a constant matrix of x's shape.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Matrix<T>& weights, T scale);

template <typename T>
Var<T> sum(const Var<T>& x);

}  // namespace sticker::ag
