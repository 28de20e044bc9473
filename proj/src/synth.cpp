#include "sticker/synth.hpp"

#include "sticker/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace sticker {

namespace {

using Rgb = std::array<float, 3>;

struct Cell {
  double cx;
  double cy;
  double radius;
};

const std::vector<AttributeSpec> kInventory = {
    {"circle", AttributeFamily::role},    {"striped", AttributeFamily::style},
    {"jumping", AttributeFamily::action}, {"square", AttributeFamily::role},
    {"dotted", AttributeFamily::style},   {"shaking", AttributeFamily::action},
    {"triangle", AttributeFamily::role},  {"checkered", AttributeFamily::style},
    {"waving", AttributeFamily::action},  {"diamond", AttributeFamily::role},
    {"framed", AttributeFamily::style},   {"peeking", AttributeFamily::action},
    {"cross", AttributeFamily::role},     {"glowing", AttributeFamily::style},
    {"spinning", AttributeFamily::action}, {"ring", AttributeFamily::role},
};

Rgb role_color(const std::string& name) {
  if (name == "circle") return {0.85f, 0.15f, 0.15f};
  if (name == "square") return {0.15f, 0.30f, 0.85f};
  if (name == "triangle") return {0.10f, 0.65f, 0.20f};
  if (name == "diamond") return {0.95f, 0.55f, 0.05f};
  if (name == "cross") return {0.60f, 0.15f, 0.70f};
  return {0.05f, 0.60f, 0.60f};  // ring
}

bool role_contains(const std::string& name, double u, double v) {
  const double r2 = u * u + v * v;
  if (name == "circle") return r2 <= 1.0;
  if (name == "square") return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
  if (name == "triangle") return v >= -0.9 && v <= 0.8 && std::abs(u) <= (v + 0.9) / 1.7 * 0.95;
  if (name == "diamond") return std::abs(u) + std::abs(v) <= 1.0;
  if (name == "cross") {
    return (std::abs(u) <= 0.3 && std::abs(v) <= 0.9) || (std::abs(v) <= 0.3 && std::abs(u) <= 0.9);
  }
  return r2 >= 0.55 * 0.55 && r2 <= 1.0;  // ring
}

double frac(double x) { return x - std::floor(x); }

bool action_contains(const std::string& name, double u, double v) {
  constexpr double pi = std::numbers::pi;
  if (name == "jumping") {
    const bool shaft = std::abs(u) <= 0.14 && v >= -0.35 && v <= 0.9;
    const bool head = v >= -0.9 && v <= -0.35 && std::abs(u) <= (v + 0.9) * 1.0;
    return shaft || head;
  }
  if (name == "shaking") {
    const double zig = 0.5 * (2.0 * std::abs(2.0 * frac(u / 0.6 + 0.25) - 1.0) - 1.0);
    return std::abs(u) <= 0.9 && std::abs(v - zig) <= 0.15;
  }
  if (name == "waving") {
    return std::abs(u) <= 0.9 && std::abs(v - 0.45 * std::sin(2.0 * pi * u)) <= 0.15;
  }
  if (name == "peeking") {
    const double e1 = (u + 0.35) * (u + 0.35) + (v + 0.15) * (v + 0.15);
    const double e2 = (u - 0.35) * (u - 0.35) + (v + 0.15) * (v + 0.15);
    const bool eyes = e1 <= 0.2 * 0.2 || e2 <= 0.2 * 0.2;
    const bool edge = std::abs(v - 0.5) <= 0.12 && std::abs(u) <= 0.85;
    return eyes || edge;
  }
  // spinning: Archimedean spiral arms 0.3 apart.
  const double r = std::sqrt(u * u + v * v);
  if (r > 0.95) return false;
  const double theta = std::atan2(v, u);
  const double f = r / 0.3 - (theta + pi) / (2.0 * pi);
  return std::abs(f - std::round(f)) * 0.3 <= 0.06;
}

void apply_style(Image& img, const std::string& name) {
  const int h = img.height;
  const int w = img.width;
  const int unit = std::max(2, std::min(h, w) / 8);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Rgb tint{};
      float alpha = 0.0f;
      if (name == "striped") {
        if (((x + y) / unit) % 2 == 0) {
          tint = {0.30f, 0.30f, 0.55f};
          alpha = 0.45f;
        }
      } else if (name == "dotted") {
        const double gx = frac((x + 0.5) / unit) - 0.5;
        const double gy = frac((y + 0.5) / unit) - 0.5;
        if (gx * gx + gy * gy <= 0.25 * 0.25) {
          tint = {0.90f, 0.30f, 0.60f};
          alpha = 0.8f;
        }
      } else if (name == "checkered") {
        const int big = unit * 2;
        if (((x / big) + (y / big)) % 2 == 0) {
          tint = {0.35f, 0.55f, 0.25f};
          alpha = 0.35f;
        }
      } else if (name == "framed") {
        const int t = std::max(2, std::min(h, w) / 16);
        if (x < t || y < t || x >= w - t || y >= h - t) {
          tint = {0.10f, 0.10f, 0.40f};
          alpha = 1.0f;
        }
      } else if (name == "glowing") {
        const double dx = (x + 0.5 - w / 2.0) / (0.35 * w);
        const double dy = (y + 0.5 - h / 2.0) / (0.35 * h);
        tint = {1.0f, 0.95f, 0.30f};
        alpha = static_cast<float>(0.7 * std::exp(-(dx * dx + dy * dy)));
      }
      if (alpha > 0.0f) {
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - alpha) * img.at(c, y, x) + alpha * tint[c];
      }
    }
  }
}

template <typename Inside>
void paint(Image& img, const Cell& cell, const Rgb& color, Inside inside) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cell.cx - cell.radius)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cell.cx + cell.radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cell.cy - cell.radius)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cell.cy + cell.radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double u = (x + 0.5 - cell.cx) / cell.radius;
      const double v = (y + 0.5 - cell.cy) / cell.radius;
      if (inside(u, v)) {
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
    }
  }
}

std::string join_or(const std::vector<std::string>& names, const char* empty) {
  if (names.empty()) return empty;
  std::string out = names[0];
  for (std::size_t i = 1; i < names.size(); ++i) out += " and " + names[i];
  return out;
}

}  // namespace

const std::vector<AttributeSpec>& attribute_inventory() { return kInventory; }

std::vector<int> tag_count_quotas(const std::vector<double>& mixture, int n) {
  double total = 0;
  for (double p : mixture) {
    if (p < 0) throw DataError("tag-count mixture weights must be non-negative");
    total += p;
  }
  if (mixture.empty() || total <= 0) throw DataError("tag-count mixture is empty");
  std::vector<int> quota(mixture.size());
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    const double exact = n * mixture[k] / total;
    quota[k] = static_cast<int>(std::floor(exact));
    assigned += quota[k];
    rema.emplace_back(exact - quota[k], k);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quota[rema[i % rema.size()].second];
  return quota;
}

Dataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  const auto& inventory = attribute_inventory();
  if (config.num_tags < 2) throw DataError("synthetic corpus needs at least 2 tags");
  if (config.num_tags > static_cast<int>(inventory.size())) {
    throw DataError("synthetic corpus supports at most " + std::to_string(inventory.size()) + " tags");
  }
  if (config.num_tags < static_cast<int>(config.attributes.size())) {
    throw DataError("tag count " + std::to_string(config.num_tags) +
                    " is smaller than the requested attribute inventory");
  }
  if (config.n < 1) throw DataError("synthetic corpus needs n >= 1");
  if (config.height < 8 || config.width < 8) throw DataError("synthetic images must be at least 8x8");

  std::vector<std::string> names;
  for (int i = 0; i < config.num_tags; ++i) names.push_back(inventory[static_cast<std::size_t>(i)].name);
  Dataset ds;
  ds.vocabulary = TagVocabulary(names);

  std::vector<int> active;
  if (config.attributes.empty()) {
    for (int i = 0; i < config.num_tags; ++i) active.push_back(i);
  } else {
    for (const auto& a : config.attributes) {
      const int id = ds.vocabulary.find(a);
      if (id < 0) throw DataError("attribute \"" + a + "\" is not among the first " +
                                  std::to_string(config.num_tags) + " inventory tags");
      active.push_back(id);
    }
  }
  const int max_tags = std::min<int>(3, static_cast<int>(active.size()));

  // Tag counts come from exact quotas, shuffled over items.
  std::vector<int> counts;
  const auto quotas = tag_count_quotas(config.tag_count_mixture, config.n);
  for (std::size_t k = 0; k < quotas.size(); ++k) {
    for (int i = 0; i < quotas[k]; ++i) counts.push_back(std::min(static_cast<int>(k) + 1, max_tags));
  }
  std::mt19937_64 order_rng(derive_seed(seed, {0xC0FFEEULL}));
  seeded_shuffle(counts, order_rng);

  const double cell_w = config.width / 2.0;
  const double cell_h = config.height / 2.0;
  for (int i = 0; i < config.n; ++i) {
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<int> pool = active;
    seeded_shuffle(pool, rng);
    std::vector<int> tags(pool.begin(), pool.begin() + counts[static_cast<std::size_t>(i)]);
    std::sort(tags.begin(), tags.end());

    Image img(3, config.height, config.width);
    Rgb base{};
    for (auto& c : base) c = static_cast<float>(0.75 + 0.2 * unit(rng));
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < config.height; ++y) {
        for (int x = 0; x < config.width; ++x) img.at(c, y, x) = base[static_cast<std::size_t>(c)];
      }
    }

    std::vector<std::string> roles, actions, styles;
    for (int t : tags) {
      const auto& spec = inventory[static_cast<std::size_t>(t)];
      if (spec.family == AttributeFamily::style) {
        apply_style(img, spec.name);
        styles.push_back(spec.name);
      }
    }
    std::array<int, 4> cells{0, 1, 2, 3};
    std::vector<int> cell_order(cells.begin(), cells.end());
    seeded_shuffle(cell_order, rng);
    std::size_t next_cell = 0;
    for (int t : tags) {
      const auto& spec = inventory[static_cast<std::size_t>(t)];
      if (spec.family == AttributeFamily::style) continue;
      const int q = cell_order[next_cell++];
      Cell cell;
      cell.cx = (q % 2 + 0.5) * cell_w + (unit(rng) - 0.5) * 0.2 * cell_w;
      cell.cy = (q / 2 + 0.5) * cell_h + (unit(rng) - 0.5) * 0.2 * cell_h;
      cell.radius = std::min(cell_w, cell_h) * 0.5 * (0.75 + 0.2 * unit(rng));
      if (spec.family == AttributeFamily::role) {
        Rgb color = role_color(spec.name);
        for (auto& c : color) c = std::clamp(c + static_cast<float>((unit(rng) - 0.5) * 0.1), 0.0f, 1.0f);
        paint(img, cell, color, [&](double u, double v) { return role_contains(spec.name, u, v); });
        roles.push_back(spec.name);
      } else {
        const float shade = static_cast<float>(0.05 + 0.1 * unit(rng));
        paint(img, cell, Rgb{shade, shade, shade},
              [&](double u, double v) { return action_contains(spec.name, u, v); });
        actions.push_back(spec.name);
      }
    }
    std::uniform_real_distribution<double> jitter(-config.noise, config.noise);
    for (auto& v : img.data) v = static_cast<float>(std::clamp(v + jitter(rng), 0.0, 1.0));

    DatasetItem item;
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%05d", i);
    item.image.id = id;
    item.image.pixels = quantize_u8(img);
    item.image.meta = {{"content", "no text"},
                       {"role", join_or(roles, "none")},
                       {"action", join_or(actions, "none")},
                       {"style", join_or(styles, "plain")}};
    item.tags = std::move(tags);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace sticker
