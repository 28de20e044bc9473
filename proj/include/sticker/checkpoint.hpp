#pragma once

// Single-file parameter archive keyed by module path, plus a JSON sidecar.
//
// Layout: "STKCKPT1", u64 tensor count, then per tensor u32 name length,
// name bytes, i64 rows, i64 cols and rows*cols little-endian float32 values.

#include "sticker/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sticker::checkpoint {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Archive {
  std::vector<std::pair<std::string, ag::Matrix<float>>> tensors;
  nlohmann::json sidecar;
};

std::filesystem::path sidecar_path(const std::filesystem::path& path);

void save(const std::filesystem::path& path, const nn::ParameterSet<float>& params, const nlohmann::json& sidecar);

Archive load(const std::filesystem::path& path);

/// Copies tensors into `params`; names and shapes must match exactly.
void restore(const Archive& archive, nn::ParameterSet<float>& params);

}  // namespace sticker::checkpoint
