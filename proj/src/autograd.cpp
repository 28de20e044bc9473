#include "sticker/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sticker::ag {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_result(Matrix<T> value, std::initializer_list<Var<T>> inputs,
                   std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) {
      any = any || in.requires_grad();
    }
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const auto& in : inputs) {
        node->parents.push_back(in.node());
      }
      node->backward_fn = std::move(backward);
    }
  }
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> make_result_n(Matrix<T> value, const std::vector<Var<T>>& inputs,
                     std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) {
      any = any || in.requires_grad();
    }
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) {
        node->parents.push_back(in.node());
      }
      node->backward_fn = std::move(backward);
    }
  }
  return Var<T>(std::move(node));
}

template <typename T>
bool wants(const NodePtr<T>& p) {
  return p->requires_grad;
}

void check(bool ok, const char* what) {
  if (!ok) {
    throw std::invalid_argument(what);
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Var<T>::Var(Matrix<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
void Var<T>::backward() const {
  if (node_->value.size() != 1) {
    throw std::invalid_argument("backward() needs a scalar root");
  }
  if (!node_->requires_grad) {
    return;
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->accumulate(Matrix<T>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward_fn || node->grad.size() == 0) {
      continue;
    }
    node->backward_fn(*node);
    if (node != node_.get()) {
      node->grad.resize(0, 0);
    }
  }
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  return Var<T>(x.value(), false);
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix<T> out = a.value() * b.value();
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (wants<T>(pa)) pa->accumulate(self.grad * pb->value.transpose());
    if (wants<T>(pb)) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  check(x.cols() == weight.rows(), "linear: input width does not match weight rows");
  check(bias.rows() == 1 && bias.cols() == weight.cols(), "linear: bias must be 1 x out");
  Matrix<T> out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return make_result<T>(std::move(out), {x, weight, bias}, [](Node<T>& self) {
    const auto& px = self.parents[0];
    const auto& pw = self.parents[1];
    const auto& pb = self.parents[2];
    if (wants<T>(px)) px->accumulate(self.grad * pw->value.transpose());
    if (wants<T>(pw)) pw->accumulate(px->value.transpose() * self.grad);
    if (wants<T>(pb)) pb->accumulate(self.grad.colwise().sum());
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result<T>(a.value() + b.value(), {a, b}, [](Node<T>& self) {
    for (const auto& p : self.parents) {
      if (wants<T>(p)) p->accumulate(self.grad);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result<T>(a.value() - b.value(), {a, b}, [](Node<T>& self) {
    if (wants<T>(self.parents[0])) self.parents[0]->accumulate(self.grad);
    if (wants<T>(self.parents[1])) self.parents[1]->accumulate(-self.grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return make_result<T>(a.value().cwiseProduct(b.value()), {a, b}, [](Node<T>& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (wants<T>(pa)) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (wants<T>(pb)) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

template <typename T>
Var<T> affine(const Var<T>& x, T alpha, T beta) {
  Matrix<T> out = (alpha * x.value().array() + beta).matrix();
  return make_result<T>(std::move(out), {x}, [alpha](Node<T>& self) {
    if (wants<T>(self.parents[0])) self.parents[0]->accumulate(alpha * self.grad);
  });
}

template <typename T>
Var<T> add_tiled(const Var<T>& x, const Var<T>& pattern) {
  const Index k = pattern.rows();
  check(k > 0 && x.rows() % k == 0 && x.cols() == pattern.cols(), "add_tiled: shape mismatch");
  Matrix<T> out = x.value();
  for (Index start = 0; start < out.rows(); start += k) {
    out.middleRows(start, k) += pattern.value();
  }
  return make_result<T>(std::move(out), {x, pattern}, [k](Node<T>& self) {
    const auto& px = self.parents[0];
    const auto& pp = self.parents[1];
    if (wants<T>(px)) px->accumulate(self.grad);
    if (wants<T>(pp)) {
      Matrix<T> g = Matrix<T>::Zero(k, self.grad.cols());
      for (Index start = 0; start < self.grad.rows(); start += k) {
        g += self.grad.middleRows(start, k);
      }
      pp->accumulate(g);
    }
  });
}

template <typename T>
Var<T> tile_rows(const Var<T>& x, Index times) {
  check(times >= 1, "tile_rows: times must be positive");
  const Index r = x.rows();
  Matrix<T> out(r * times, x.cols());
  for (Index t = 0; t < times; ++t) {
    out.middleRows(t * r, r) = x.value();
  }
  return make_result<T>(std::move(out), {x}, [r, times](Node<T>& self) {
    if (!wants<T>(self.parents[0])) return;
    Matrix<T> g = Matrix<T>::Zero(r, self.grad.cols());
    for (Index t = 0; t < times; ++t) {
      g += self.grad.middleRows(t * r, r);
    }
    self.parents[0]->accumulate(g);
  });
}

template <typename T>
Var<T> row_scale(const Var<T>& x, const Var<T>& w) {
  check(w.cols() == 1 && w.rows() == x.rows(), "row_scale: weights must be rows x 1");
  Matrix<T> out = w.value().col(0).asDiagonal() * x.value();
  return make_result<T>(std::move(out), {x, w}, [](Node<T>& self) {
    const auto& px = self.parents[0];
    const auto& pw = self.parents[1];
    if (wants<T>(px)) px->accumulate(pw->value.col(0).asDiagonal() * self.grad);
    if (wants<T>(pw)) {
      Matrix<T> g = self.grad.cwiseProduct(px->value).rowwise().sum();
      pw->accumulate(g);
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const Index n = x.rows();
  const Index d = x.cols();
  check(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d,
        "layer_norm: gamma/beta must be 1 x cols");
  Matrix<T> xhat(n, d);
  Matrix<T> inv_std(n, 1);
  for (Index i = 0; i < n; ++i) {
    const auto row = x.value().row(i);
    const T mean = row.mean();
    const T var = (row.array() - mean).square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    xhat.row(i) = (row.array() - mean) * is;
  }
  Matrix<T> out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [xhat = std::move(xhat), inv_std = std::move(inv_std), d](Node<T>& self) {
                          const auto& px = self.parents[0];
                          const auto& pg = self.parents[1];
                          const auto& pb = self.parents[2];
                          if (wants<T>(pg)) pg->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
                          if (wants<T>(pb)) pb->accumulate(self.grad.colwise().sum());
                          if (wants<T>(px)) {
                            Matrix<T> gx(self.grad.rows(), d);
                            const auto gamma_row = pg->value.row(0).array();
                            for (Index i = 0; i < self.grad.rows(); ++i) {
                              const auto dxhat = (self.grad.row(i).array() * gamma_row).eval();
                              const T mean_d = dxhat.mean();
                              const T mean_dx = (dxhat * xhat.row(i).array()).mean();
                              gx.row(i) = inv_std(i, 0) * (dxhat - mean_d - xhat.row(i).array() * mean_dx);
                            }
                            px->accumulate(gx);
                          }
                        });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const T a = T(0.044715);
  Matrix<T> t = (c * (x.value().array() + a * x.value().array().cube())).tanh().matrix();
  Matrix<T> out = (T(0.5) * x.value().array() * (T(1) + t.array())).matrix();
  return make_result<T>(std::move(out), {x}, [t = std::move(t), c, a](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    const auto xv = px->value.array();
    const auto tv = t.array();
    const auto dt = (T(1) - tv.square()) * c * (T(1) + T(3) * a * xv.square());
    Matrix<T> g = (self.grad.array() * (T(0.5) * (T(1) + tv) + T(0.5) * xv * dt)).matrix();
    px->accumulate(g);
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Matrix<T> out = x.value().cwiseMax(T(0));
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    Matrix<T> g = (px->value.array() > T(0)).select(self.grad, T(0));
    px->accumulate(g);
  });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Matrix<T> out = x.value().cwiseMax(lo).cwiseMin(hi);
  return make_result<T>(std::move(out), {x}, [lo, hi](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    const auto v = px->value.array();
    Matrix<T> g = (v >= lo && v <= hi).select(self.grad, T(0));
    px->accumulate(g);
  });
}

template <typename T>
Var<T> multi_head_attention(const Var<T>& qkv, Index heads, Index seq_len) {
  const Index rows = qkv.rows();
  check(qkv.cols() % 3 == 0, "attention: qkv width must be divisible by 3");
  const Index d = qkv.cols() / 3;
  check(heads >= 1 && d % heads == 0, "attention: width not divisible by heads");
  check(seq_len >= 1 && rows % seq_len == 0, "attention: rows not divisible by seq_len");
  const Index dh = d / heads;
  const Index blocks = rows / seq_len;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Matrix<T> out(rows, d);
  // Attention probabilities per (block, head), stacked: (blocks*heads*seq) x seq.
  Matrix<T> probs(blocks * heads * seq_len, seq_len);
  const Matrix<T>& v = qkv.value();
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * seq_len;
    for (Index h = 0; h < heads; ++h) {
      const auto q = v.block(r0, h * dh, seq_len, dh);
      const auto k = v.block(r0, d + h * dh, seq_len, dh);
      const auto val = v.block(r0, 2 * d + h * dh, seq_len, dh);
      auto p = probs.middleRows((b * heads + h) * seq_len, seq_len);
      p.noalias() = scale * (q * k.transpose());
      for (Index i = 0; i < seq_len; ++i) {
        const T mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      out.block(r0, h * dh, seq_len, dh).noalias() = p * val;
    }
  }
  return make_result<T>(
      std::move(out), {qkv},
      [probs = std::move(probs), heads, seq_len, d, dh, blocks, scale](Node<T>& self) {
        const auto& pq = self.parents[0];
        if (!wants<T>(pq)) return;
        const Matrix<T>& v = pq->value;
        Matrix<T> g(v.rows(), v.cols());
        Matrix<T> dp(seq_len, seq_len);
        Matrix<T> ds(seq_len, seq_len);
        for (Index b = 0; b < blocks; ++b) {
          const Index r0 = b * seq_len;
          for (Index h = 0; h < heads; ++h) {
            const auto q = v.block(r0, h * dh, seq_len, dh);
            const auto k = v.block(r0, d + h * dh, seq_len, dh);
            const auto val = v.block(r0, 2 * d + h * dh, seq_len, dh);
            const auto p = probs.middleRows((b * heads + h) * seq_len, seq_len);
            const auto go = self.grad.block(r0, h * dh, seq_len, dh);
            g.block(r0, 2 * d + h * dh, seq_len, dh).noalias() = p.transpose() * go;
            dp.noalias() = go * val.transpose();
            for (Index i = 0; i < seq_len; ++i) {
              const T dot = dp.row(i).dot(p.row(i));
              ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
            }
            ds *= scale;
            g.block(r0, h * dh, seq_len, dh).noalias() = ds * k;
            g.block(r0, d + h * dh, seq_len, dh).noalias() = ds.transpose() * q;
          }
        }
        pq->accumulate(g);
      });
}

template <typename T>
Var<T> block_mean_rows(const Var<T>& x, Index block) {
  check(block >= 1 && x.rows() % block == 0, "block_mean_rows: rows not divisible by block");
  const Index groups = x.rows() / block;
  Matrix<T> out(groups, x.cols());
  for (Index g = 0; g < groups; ++g) {
    out.row(g) = x.value().middleRows(g * block, block).colwise().mean();
  }
  return make_result<T>(std::move(out), {x}, [block, groups](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    Matrix<T> g(groups * block, self.grad.cols());
    const T inv = T(1) / static_cast<T>(block);
    for (Index i = 0; i < groups; ++i) {
      g.middleRows(i * block, block).rowwise() = self.grad.row(i) * inv;
    }
    px->accumulate(g);
  });
}

template <typename T>
Var<T> interleave_rows(std::span<const Var<T>> parts) {
  check(!parts.empty(), "interleave_rows: no parts");
  const Index k = static_cast<Index>(parts.size());
  const Index b = parts[0].rows();
  const Index d = parts[0].cols();
  for (const auto& p : parts) {
    check(p.rows() == b && p.cols() == d, "interleave_rows: parts differ in shape");
  }
  Matrix<T> out(b * k, d);
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < k; ++j) {
      out.row(i * k + j) = parts[j].value().row(i);
    }
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return make_result_n<T>(std::move(out), inputs, [k, b, d](Node<T>& self) {
    for (Index j = 0; j < k; ++j) {
      const auto& p = self.parents[j];
      if (!wants<T>(p)) continue;
      Matrix<T> g(b, d);
      for (Index i = 0; i < b; ++i) {
        g.row(i) = self.grad.row(i * k + j);
      }
      p->accumulate(g);
    }
  });
}

template <typename T>
Var<T> select_rows(const Var<T>& x, std::span<const Index> rows) {
  Matrix<T> out(static_cast<Index>(rows.size()), x.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    check(rows[i] >= 0 && rows[i] < x.rows(), "select_rows: index out of range");
    out.row(i) = x.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  const Index src_rows = x.rows();
  return make_result<T>(std::move(out), {x}, [idx = std::move(idx), src_rows](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    Matrix<T> g = Matrix<T>::Zero(src_rows, self.grad.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    }
    px->accumulate(g);
  });
}

template <typename T>
Var<T> mask_rows(const Var<T>& x, const Var<T>& token, std::span<const std::uint8_t> mask) {
  check(static_cast<Index>(mask.size()) == x.rows(), "mask_rows: mask length differs from rows");
  check(token.rows() == 1 && token.cols() == x.cols(), "mask_rows: token must be 1 x cols");
  Matrix<T> out = x.value();
  for (Index i = 0; i < out.rows(); ++i) {
    if (mask[i]) out.row(i) = token.value().row(0);
  }
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return make_result<T>(std::move(out), {x, token}, [m = std::move(m)](Node<T>& self) {
    const auto& px = self.parents[0];
    const auto& pt = self.parents[1];
    if (wants<T>(px)) {
      Matrix<T> g = self.grad;
      for (Index i = 0; i < g.rows(); ++i) {
        if (m[i]) g.row(i).setZero();
      }
      px->accumulate(g);
    }
    if (wants<T>(pt)) {
      Matrix<T> g = Matrix<T>::Zero(1, self.grad.cols());
      for (Index i = 0; i < self.grad.rows(); ++i) {
        if (m[i]) g += self.grad.row(i);
      }
      pt->accumulate(g);
    }
  });
}

template <typename T>
Var<T> cosine_affinity(const Var<T>& a, const Var<T>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "cosine_affinity: shape mismatch");
  const Index n = a.rows();
  Matrix<T> out(n, 1);
  // Per-row cosine and norms; rows whose affinity is clamped or undefined get no gradient.
  std::vector<T> cosv(n), na(n), nb(n);
  std::vector<std::uint8_t> live(n, 0);
  for (Index i = 0; i < n; ++i) {
    na[i] = a.value().row(i).norm();
    nb[i] = b.value().row(i).norm();
    if (na[i] == T(0) || nb[i] == T(0)) {
      out(i, 0) = T(0);
      continue;
    }
    cosv[i] = a.value().row(i).dot(b.value().row(i)) / (na[i] * nb[i]);
    const T r = (T(1) + cosv[i]) / T(2);
    out(i, 0) = std::clamp(r, T(0), T(1));
    live[i] = (r > T(0) && r < T(1)) ? 1 : 0;
  }
  return make_result<T>(std::move(out), {a, b},
                        [cosv = std::move(cosv), na = std::move(na), nb = std::move(nb),
                         live = std::move(live)](Node<T>& self) {
                          const auto& pa = self.parents[0];
                          const auto& pb = self.parents[1];
                          const Index n = self.grad.rows();
                          Matrix<T> ga, gb;
                          if (wants<T>(pa)) ga = Matrix<T>::Zero(n, pa->value.cols());
                          if (wants<T>(pb)) gb = Matrix<T>::Zero(n, pb->value.cols());
                          for (Index i = 0; i < n; ++i) {
                            if (!live[i]) continue;
                            const T g = self.grad(i, 0) / T(2);
                            const auto ar = pa->value.row(i);
                            const auto br = pb->value.row(i);
                            if (ga.size()) {
                              ga.row(i) = g * (br / (na[i] * nb[i]) - cosv[i] * ar / (na[i] * na[i]));
                            }
                            if (gb.size()) {
                              gb.row(i) = g * (ar / (na[i] * nb[i]) - cosv[i] * br / (nb[i] * nb[i]));
                            }
                          }
                          if (ga.size()) pa->accumulate(ga);
                          if (gb.size()) pb->accumulate(gb);
                        });
}

template <typename T>
Var<T> scatter_mean(const Var<T>& values, std::span<const Index> targets, Index out_rows) {
  check(values.cols() == 1, "scatter_mean: values must be a column");
  check(static_cast<Index>(targets.size()) == values.rows(), "scatter_mean: one target per value");
  Matrix<T> out = Matrix<T>::Zero(out_rows, 1);
  std::vector<T> counts(static_cast<std::size_t>(out_rows), T(0));
  for (Index i = 0; i < values.rows(); ++i) {
    const Index t = targets[static_cast<std::size_t>(i)];
    check(t >= 0 && t < out_rows, "scatter_mean: target out of range");
    out(t, 0) += values.value()(i, 0);
    counts[static_cast<std::size_t>(t)] += T(1);
  }
  for (Index r = 0; r < out_rows; ++r) {
    if (counts[static_cast<std::size_t>(r)] == T(0)) {
      throw std::invalid_argument("scatter_mean: position " + std::to_string(r) + " was never observed");
    }
    out(r, 0) /= counts[static_cast<std::size_t>(r)];
  }
  std::vector<Index> tg(targets.begin(), targets.end());
  return make_result<T>(std::move(out), {values},
                        [tg = std::move(tg), counts = std::move(counts)](Node<T>& self) {
                          const auto& pv = self.parents[0];
                          if (!wants<T>(pv)) return;
                          Matrix<T> g(static_cast<Index>(tg.size()), 1);
                          for (std::size_t i = 0; i < tg.size(); ++i) {
                            g(static_cast<Index>(i), 0) = self.grad(tg[i], 0) / counts[static_cast<std::size_t>(tg[i])];
                          }
                          pv->accumulate(g);
                        });
}

template <typename T>
Var<T> log_softmax(const Var<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i).array();
    const T mx = row.maxCoeff();
    const T lse = mx + std::log((row - mx).exp().sum());
    out.row(i) = row - lse;
  }
  Matrix<T> probs = out.array().exp().matrix();
  return make_result<T>(std::move(out), {x}, [probs = std::move(probs)](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    Matrix<T> g = self.grad;
    for (Index i = 0; i < g.rows(); ++i) {
      const T s = self.grad.row(i).sum();
      g.row(i) -= s * probs.row(i);
    }
    px->accumulate(g);
  });
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i).array();
    const T mx = row.maxCoeff();
    out.row(i) = (row - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  Matrix<T> keep = out;
  return make_result<T>(std::move(out), {x}, [p = std::move(keep)](Node<T>& self) {
    const auto& px = self.parents[0];
    if (!wants<T>(px)) return;
    Matrix<T> g(p.rows(), p.cols());
    for (Index i = 0; i < p.rows(); ++i) {
      const T dot = self.grad.row(i).dot(p.row(i));
      g.row(i) = p.row(i).array() * (self.grad.row(i).array() - dot);
    }
    px->accumulate(g);
  });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  Matrix<T> out = x.value().array().exp().matrix();
  Matrix<T> keep = out;
  return make_result<T>(std::move(out), {x}, [e = std::move(keep)](Node<T>& self) {
    if (wants<T>(self.parents[0])) self.parents[0]->accumulate(self.grad.cwiseProduct(e));
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Matrix<T>& weights, T scale) {
  check(weights.rows() == x.rows() && weights.cols() == x.cols(), "weighted_sum: shape mismatch");
  Matrix<T> out(1, 1);
  out(0, 0) = scale * x.value().cwiseProduct(weights).sum();
  return make_result<T>(std::move(out), {x}, [w = weights, scale](Node<T>& self) {
    if (wants<T>(self.parents[0])) self.parents[0]->accumulate((self.grad(0, 0) * scale) * w);
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  Matrix<T> out(1, 1);
  out(0, 0) = x.value().sum();
  const Index r = x.rows();
  const Index c = x.cols();
  return make_result<T>(std::move(out), {x}, [r, c](Node<T>& self) {
    if (wants<T>(self.parents[0])) {
      self.parents[0]->accumulate(Matrix<T>::Constant(r, c, self.grad(0, 0)));
    }
  });
}

#define STICKER_AG_INSTANTIATE(T)                                                                  \
  template class Var<T>;                                                                           \
  template Var<T> detach(const Var<T>&);                                                           \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                               \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                               \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                               \
  template Var<T> affine(const Var<T>&, T, T);                                                     \
  template Var<T> add_tiled(const Var<T>&, const Var<T>&);                                         \
  template Var<T> tile_rows(const Var<T>&, Index);                                                 \
  template Var<T> row_scale(const Var<T>&, const Var<T>&);                                         \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                      \
  template Var<T> gelu(const Var<T>&);                                                             \
  template Var<T> relu(const Var<T>&);                                                             \
  template Var<T> clamp(const Var<T>&, T, T);                                                      \
  template Var<T> multi_head_attention(const Var<T>&, Index, Index);                               \
  template Var<T> block_mean_rows(const Var<T>&, Index);                                           \
  template Var<T> interleave_rows(std::span<const Var<T>>);                                        \
  template Var<T> select_rows(const Var<T>&, std::span<const Index>);                              \
  template Var<T> mask_rows(const Var<T>&, const Var<T>&, std::span<const std::uint8_t>);          \
  template Var<T> cosine_affinity(const Var<T>&, const Var<T>&);                                   \
  template Var<T> scatter_mean(const Var<T>&, std::span<const Index>, Index);                      \
  template Var<T> log_softmax(const Var<T>&);                                                      \
  template Var<T> softmax(const Var<T>&);                                                          \
  template Var<T> exp(const Var<T>&);                                                              \
  template Var<T> weighted_sum(const Var<T>&, const Matrix<T>&, T);                                \
  template Var<T> sum(const Var<T>&);

STICKER_AG_INSTANTIATE(float)
STICKER_AG_INSTANTIATE(double)

#undef STICKER_AG_INSTANTIATE

}  // namespace sticker::ag
