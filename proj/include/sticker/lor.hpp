#pragma once

// Local re-attention: patch-aligned masking, reconstruction similarity and the
// renewed per-patch attention r_hat = 1 - r.
//
// These are the value-level building blocks. The differentiable version used
// in training lives in model.hpp and is checked against these.

#include "sticker/autograd.hpp"
#include "sticker/image.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sticker::lor {

using ag::Matrix;

class LorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// N patches of dimension D = P*P*C, row-major patch order; each row is the
/// P x P x C block flattened as (row, column, channel).
struct PatchGrid {
  int patch = 0;
  int channels = 0;
  Matrix<float> patches;

  int count() const { return static_cast<int>(patches.rows()); }
  int dim() const { return static_cast<int>(patches.cols()); }
};

PatchGrid patchify(const Image& image, int patch);

/// Inverse of patchify for a grid of `rows` x `cols` patches.
Image unpatchify(const PatchGrid& grid, int height, int width);

struct MaskPlan {
  int patches = 0;
  int masked_per_round = 0;           // L
  std::vector<std::vector<int>> rounds;  // each sorted, size L
};

/// L = ceil(ratio * N); ceil(N / L) rounds. Each round draws from patches not
/// yet covered first, then tops up uniformly from the rest.
MaskPlan sample_mask_rounds(int patches, double mask_ratio, std::uint64_t seed);

int masked_count(int patches, double mask_ratio);

/// Rows listed in `masked` are replaced by `token`.
template <typename T>
Matrix<T> corrupt(const Matrix<T>& patches, const std::vector<int>& masked, const Matrix<T>& token);

/// (1 + cos) / 2 clamped to [0, 1]; 0 when either vector is all-zero.
double patch_similarity(const Eigen::Ref<const Eigen::VectorXd>& predicted,
                        const Eigen::Ref<const Eigen::VectorXd>& original);

struct RenewedAttention {
  std::vector<double> weights;  // r_hat
  std::vector<double> raw;      // r
};

/// per_round[k][j] is the similarity observed for patch plan.rounds[k][j].
RenewedAttention renewed_attention(const MaskPlan& plan, const std::vector<std::vector<double>>& per_round);

/// Scales token i by weights[i].
template <typename T>
Matrix<T> apply_attention(const Matrix<T>& tokens, const std::vector<double>& weights);

}  // namespace sticker::lor
