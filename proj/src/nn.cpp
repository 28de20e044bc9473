#include "sticker/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sticker::nn {

template <typename T>
Var<T> ParameterSet<T>::add(const std::string& name, Matrix<T> init) {
  for (const auto& [existing, _] : entries_) {
    if (existing == name) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
  }
  auto v = Var<T>::parameter(std::move(init));
  entries_.emplace_back(name, v);
  return v;
}

template <typename T>
Var<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& [n, v] : entries_) {
    if (n == name) return &v;
  }
  return nullptr;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [_, v] : entries_) total += static_cast<std::size_t>(v.value().size());
  return total;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [_, v] : entries_) v.zero_grad();
}

template <typename T>
Matrix<T> Initializer::normal(Index rows, Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<T> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<T>(dist(rng_));
  }
  return m;
}

template <typename T>
Linear<T>::Linear(ParameterSet<T>& params, const std::string& name, Index in, Index out,
                  Initializer& init)
    : weight(params.add(name + ".weight", init.xavier<T>(in, out))),
      bias(params.add(name + ".bias", Matrix<T>::Zero(1, out))) {}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterSet<T>& params, const std::string& name, Index dim)
    : gamma(params.add(name + ".gamma", Matrix<T>::Ones(1, dim))),
      beta(params.add(name + ".beta", Matrix<T>::Zero(1, dim))) {}

template <typename T>
TransformerEncoder<T>::TransformerEncoder(ParameterSet<T>& params, const std::string& name,
                                          const TransformerShape& shape, Initializer& init)
    : shape_(shape) {
  if (shape.dim % shape.heads != 0) {
    throw std::invalid_argument("transformer width must be divisible by head count");
  }
  const Index d = shape.dim;
  for (Index l = 0; l < shape.layers; ++l) {
    const std::string p = name + ".layers." + std::to_string(l);
    Block b;
    b.ln1 = LayerNorm<T>(params, p + ".ln1", d);
    b.qkv = Linear<T>(params, p + ".qkv", d, 3 * d, init);
    b.proj = Linear<T>(params, p + ".proj", d, d, init);
    b.ln2 = LayerNorm<T>(params, p + ".ln2", d);
    b.fc1 = Linear<T>(params, p + ".fc1", d, shape.ffn_mult * d, init);
    b.fc2 = Linear<T>(params, p + ".fc2", shape.ffn_mult * d, d, init);
    blocks_.push_back(std::move(b));
  }
  final_ln_ = LayerNorm<T>(params, name + ".final_ln", d);
}

template <typename T>
Var<T> TransformerEncoder<T>::operator()(const Var<T>& x, Index seq_len) const {
  Var<T> h = x;
  for (const auto& b : blocks_) {
    auto attn = ag::multi_head_attention(b.qkv(b.ln1(h)), shape_.heads, seq_len);
    h = ag::add(h, b.proj(attn));
    auto ffn = b.fc2(ag::gelu(b.fc1(b.ln2(h))));
    h = ag::add(h, ffn);
  }
  return final_ln_(h);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template Matrix<float> Initializer::normal<float>(Index, Index, double);
template Matrix<double> Initializer::normal<double>(Index, Index, double);
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template class TransformerEncoder<float>;
template class TransformerEncoder<double>;

}  // namespace sticker::nn
