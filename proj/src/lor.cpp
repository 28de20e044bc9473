#include "sticker/lor.hpp"

#include "sticker/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sticker::lor {

PatchGrid patchify(const Image& image, int patch) {
  if (patch <= 0 || image.height % patch != 0 || image.width % patch != 0) {
    throw LorError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                   " (H x W) is not divisible by patch size P=" + std::to_string(patch));
  }
  const int gh = image.height / patch;
  const int gw = image.width / patch;
  PatchGrid grid;
  grid.patch = patch;
  grid.channels = image.channels;
  grid.patches.resize(gh * gw, patch * patch * image.channels);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int row = gy * gw + gx;
      int col = 0;
      for (int py = 0; py < patch; ++py) {
        for (int px = 0; px < patch; ++px) {
          for (int c = 0; c < image.channels; ++c) {
            grid.patches(row, col++) = image.at(c, gy * patch + py, gx * patch + px);
          }
        }
      }
    }
  }
  return grid;
}

Image unpatchify(const PatchGrid& grid, int height, int width) {
  const int p = grid.patch;
  const int gw = width / p;
  Image img(grid.channels, height, width);
  for (int row = 0; row < grid.count(); ++row) {
    const int gy = row / gw;
    const int gx = row % gw;
    int col = 0;
    for (int py = 0; py < p; ++py) {
      for (int px = 0; px < p; ++px) {
        for (int c = 0; c < grid.channels; ++c) img.at(c, gy * p + py, gx * p + px) = grid.patches(row, col++);
      }
    }
  }
  return img;
}

int masked_count(int patches, double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw LorError("mask ratio must lie in (0, 1)");
  if (patches < 1) throw LorError("need at least one patch");
  // The epsilon keeps exact products such as 0.5 * 4 from rounding up.
  const int l = static_cast<int>(std::ceil(mask_ratio * patches - 1e-9));
  return std::clamp(l, 1, patches);
}

MaskPlan sample_mask_rounds(int patches, double mask_ratio, std::uint64_t seed) {
  MaskPlan plan;
  plan.patches = patches;
  plan.masked_per_round = masked_count(patches, mask_ratio);
  const int l = plan.masked_per_round;
  const int rounds = (patches + l - 1) / l;
  std::mt19937_64 rng(seed);
  std::vector<int> uncovered(static_cast<std::size_t>(patches));
  for (int i = 0; i < patches; ++i) uncovered[static_cast<std::size_t>(i)] = i;
  std::vector<char> covered(static_cast<std::size_t>(patches), 0);
  for (int k = 0; k < rounds; ++k) {
    seeded_shuffle(uncovered, rng);
    std::vector<int> pick;
    const int fresh = std::min<int>(l, static_cast<int>(uncovered.size()));
    pick.assign(uncovered.begin(), uncovered.begin() + fresh);
    uncovered.erase(uncovered.begin(), uncovered.begin() + fresh);
    if (fresh < l) {
      std::vector<int> rest;
      for (int i = 0; i < patches; ++i) {
        if (std::find(pick.begin(), pick.end(), i) == pick.end()) rest.push_back(i);
      }
      seeded_shuffle(rest, rng);
      pick.insert(pick.end(), rest.begin(), rest.begin() + (l - fresh));
    }
    std::sort(pick.begin(), pick.end());
    std::sort(uncovered.begin(), uncovered.end());
    plan.rounds.push_back(std::move(pick));
  }
  return plan;
}

template <typename T>
Matrix<T> corrupt(const Matrix<T>& patches, const std::vector<int>& masked, const Matrix<T>& token) {
  if (token.rows() != 1 || token.cols() != patches.cols()) throw LorError("mask token must be 1 x D");
  Matrix<T> out = patches;
  for (int i : masked) {
    if (i < 0 || i >= patches.rows()) throw LorError("masked position out of range");
    out.row(i) = token.row(0);
  }
  return out;
}

double patch_similarity(const Eigen::Ref<const Eigen::VectorXd>& predicted,
                        const Eigen::Ref<const Eigen::VectorXd>& original) {
  if (predicted.size() != original.size()) throw LorError("similarity needs vectors of equal dimension");
  const double np = predicted.norm();
  const double no = original.norm();
  if (np == 0.0 || no == 0.0) return 0.0;
  return std::clamp((1.0 + predicted.dot(original) / (np * no)) / 2.0, 0.0, 1.0);
}

RenewedAttention renewed_attention(const MaskPlan& plan, const std::vector<std::vector<double>>& per_round) {
  if (per_round.size() != plan.rounds.size()) throw LorError("one similarity list per masking round expected");
  std::vector<double> sum(static_cast<std::size_t>(plan.patches), 0.0);
  std::vector<int> seen(static_cast<std::size_t>(plan.patches), 0);
  for (std::size_t k = 0; k < plan.rounds.size(); ++k) {
    if (per_round[k].size() != plan.rounds[k].size()) throw LorError("similarity count differs from round size");
    for (std::size_t j = 0; j < plan.rounds[k].size(); ++j) {
      const auto p = static_cast<std::size_t>(plan.rounds[k][j]);
      sum[p] += per_round[k][j];
      ++seen[p];
    }
  }
  RenewedAttention out;
  for (int i = 0; i < plan.patches; ++i) {
    const auto p = static_cast<std::size_t>(i);
    if (seen[p] == 0) throw LorError("patch " + std::to_string(i) + " is not covered by any masking round");
    const double r = sum[p] / seen[p];
    out.raw.push_back(r);
    out.weights.push_back(1.0 - r);
  }
  return out;
}

template <typename T>
Matrix<T> apply_attention(const Matrix<T>& tokens, const std::vector<double>& weights) {
  if (static_cast<ag::Index>(weights.size()) != tokens.rows()) {
    throw LorError("attention has " + std::to_string(weights.size()) + " weights for " +
                   std::to_string(tokens.rows()) + " tokens");
  }
  Matrix<T> out = tokens;
  for (ag::Index i = 0; i < out.rows(); ++i) out.row(i) *= static_cast<T>(weights[static_cast<std::size_t>(i)]);
  return out;
}

template Matrix<float> corrupt(const Matrix<float>&, const std::vector<int>&, const Matrix<float>&);
template Matrix<double> corrupt(const Matrix<double>&, const std::vector<int>&, const Matrix<double>&);
template Matrix<float> apply_attention(const Matrix<float>&, const std::vector<double>&);
template Matrix<double> apply_attention(const Matrix<double>&, const std::vector<double>&);

}  // namespace sticker::lor
