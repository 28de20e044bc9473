#pragma once

// Procedural sticker corpus: each tag is a visual primitive (a coloured shape,
// an action glyph or a background style), and an item's tags are exactly the
// primitives drawn into it.

#include "sticker/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sticker {

enum class AttributeFamily { role, action, style };

struct AttributeSpec {
  std::string name;
  AttributeFamily family;
};

/// Built-in primitive inventory, in vocabulary order.
const std::vector<AttributeSpec>& attribute_inventory();

struct GeneratorConfig {
  int n = 2000;
  int num_tags = 12;
  int height = 64;
  int width = 64;
  /// Probability of an item carrying 1, 2, 3 ... tags. Realized as exact quotas.
  std::vector<double> tag_count_mixture = {0.5, 0.3, 0.2};
  /// Restricts items to these tags; empty means every vocabulary tag.
  std::vector<std::string> attributes;
  double noise = 0.03;
};

/// Pure function of (config, seed).
Dataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

/// Tag-count quotas used for `n` items (index 0 = one tag).
std::vector<int> tag_count_quotas(const std::vector<double>& mixture, int n);

}  // namespace sticker
