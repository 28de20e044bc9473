#pragma once

// Parameter containers and the small set of layers the models are built from.

#include "sticker/autograd.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sticker::nn {

using ag::Index;
using ag::Matrix;
using ag::Var;

/// Ordered registry of named trainable tensors ("encoder.layers.0.qkv.weight").
template <typename T>
class ParameterSet {
 public:
  Var<T> add(const std::string& name, Matrix<T> init);

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Var<T>>>& entries() { return entries_; }

  Var<T>* find(const std::string& name);
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var<T>>> entries_;
};

/// Deterministic initializers. Values are drawn in double and cast, so float
/// and double models built from the same seed start from the same point.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  Matrix<T> normal(Index rows, Index cols, double stddev);

  template <typename T>
  Matrix<T> xavier(Index rows, Index cols) {
    return normal<T>(rows, cols, std::sqrt(2.0 / static_cast<double>(rows + cols)));
  }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
struct Linear {
  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, Index in, Index out, Initializer& init);

  Var<T> operator()(const Var<T>& x) const { return ag::linear(x, weight, bias); }

  Var<T> weight;  // in x out
  Var<T> bias;    // 1 x out
};

template <typename T>
struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParameterSet<T>& params, const std::string& name, Index dim);

  Var<T> operator()(const Var<T>& x) const { return ag::layer_norm(x, gamma, beta); }

  Var<T> gamma;
  Var<T> beta;
};

struct TransformerShape {
  Index dim = 128;
  Index layers = 4;
  Index heads = 4;
  Index ffn_mult = 4;
};

/// Pre-norm transformer encoder over independent fixed-length sequences that
/// are stacked row-wise (batch * seq_len rows).
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParameterSet<T>& params, const std::string& name, const TransformerShape& shape,
                     Initializer& init);

  Var<T> operator()(const Var<T>& x, Index seq_len) const;

  const TransformerShape& shape() const { return shape_; }

 private:
  struct Block {
    LayerNorm<T> ln1;
    Linear<T> qkv;
    Linear<T> proj;
    LayerNorm<T> ln2;
    Linear<T> fc1;
    Linear<T> fc2;
  };

  TransformerShape shape_;
  std::vector<Block> blocks_;
  LayerNorm<T> final_ln_;
};

}  // namespace sticker::nn
