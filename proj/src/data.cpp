#include "sticker/data.hpp"

#include "sticker/digest.hpp"
#include "sticker/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sticker {

using nlohmann::json;

TagVocabulary::TagVocabulary(std::vector<std::string> tags) : tags_(std::move(tags)) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i].empty()) throw DataError("empty tag at line " + std::to_string(i + 1));
    if (!index_.emplace(tags_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate tag in vocabulary: " + tags_[i]);
    }
  }
  if (tags_.size() < 2) throw DataError("a tag vocabulary needs at least 2 tags");
}

TagVocabulary TagVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError("blank line in vocabulary " + path.string());
    tags.push_back(line);
  }
  return TagVocabulary(std::move(tags));
}

void TagVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tags_) out << t << '\n';
}

int TagVocabulary::find(const std::string& tag) const {
  auto it = index_.find(tag);
  return it == index_.end() ? -1 : it->second;
}

int TagVocabulary::id(const std::string& tag) const {
  const int i = find(tag);
  if (i < 0) throw DataError("tag not in vocabulary: " + tag);
  return i;
}

std::string TagVocabulary::hash() const {
  std::string joined;
  for (const auto& t : tags_) {
    joined += t;
    joined += '\n';
  }
  return sha256_hex(joined);
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!ids.insert(item.image.id).second) throw DataError("duplicate sticker id: " + item.image.id);
    if (item.tags.empty()) throw DataError("sticker " + item.image.id + " has no tags");
    for (int t : item.tags) {
      if (t < 0 || t >= vocabulary.size()) {
        throw DataError("sticker " + item.image.id + " has out-of-range tag id " + std::to_string(t));
      }
    }
  }
}

LoadResult load_manifest(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& vocab_path, const LoadOptions& options) {
  LoadResult result;
  result.dataset.vocabulary = TagVocabulary::load(vocab_path);
  const auto& vocab = result.dataset.vocabulary;

  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  const auto base = manifest_path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    DatasetItem item;
    item.image.id = rec.at("id").get<std::string>();
    const auto tag_names = rec.at("tags").get<std::vector<std::string>>();
    if (tag_names.empty()) throw DataError("sticker " + item.image.id + " has an empty tag list");
    std::set<int> ids;
    for (const auto& name : tag_names) {
      const int id = vocab.find(name);
      if (id < 0) throw DataError("sticker " + item.image.id + " cites unknown tag \"" + name + "\"");
      ids.insert(id);
    }
    item.tags.assign(ids.begin(), ids.end());
    if (rec.contains("meta")) {
      item.image.meta = rec.at("meta").get<std::map<std::string, std::string>>();
    }
    const auto image_path = base / rec.at("image").get<std::string>();
    try {
      auto pixels = read_image(image_path);
      if (options.height > 0 && options.width > 0 &&
          (pixels.height != options.height || pixels.width != options.width)) {
        pixels = resize_bilinear(pixels, options.height, options.width);
      }
      item.image.pixels = std::move(pixels);
    } catch (const ImageError& e) {
      result.errors.push_back({item.image.id, e.what()});
      continue;
    }
    result.dataset.items.push_back(std::move(item));
  }
  result.dataset.validate();
  return result;
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  dataset.vocabulary.save(dir / "vocab.txt");
  std::ofstream out(dir / "manifest.jsonl", std::ios::binary);
  if (!out) throw DataError("cannot write manifest under " + dir.string());
  for (const auto& item : dataset.items) {
    const std::string rel = "images/" + item.image.id + ".png";
    write_png(dir / rel, item.image.pixels);
    json rec;
    rec["id"] = item.image.id;
    rec["image"] = rel;
    json tags = json::array();
    for (int t : item.tags) tags.push_back(dataset.vocabulary.tag(t));
    rec["tags"] = tags;
    rec["meta"] = item.image.meta;
    out << rec.dump() << '\n';
  }
}

std::string image_checksum(const Image& image) {
  std::string bytes;
  bytes.reserve(image.data.size() + 16);
  bytes += std::to_string(image.channels) + "x" + std::to_string(image.height) + "x" +
           std::to_string(image.width) + ":";
  for (float v : image.data) {
    bytes.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return sha256_hex(bytes);
}

std::array<Dataset, 3> split_dataset(const Dataset& dataset, const std::array<double, 3>& ratios,
                                     std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 3) throw DataError("splitting needs at least 3 items, got " + std::to_string(n));
  double total = 0;
  for (double r : ratios) {
    if (!(r > 0)) throw DataError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.items[a].image.id < dataset.items[b].image.id;
  });
  std::mt19937_64 rng(seed);
  seeded_shuffle(order, rng);

  const auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_val = part(ratios[1]);
  const std::size_t n_test = part(ratios[2]);
  const std::size_t n_train = n - n_val - n_test;

  std::array<Dataset, 3> out;
  for (auto& d : out) d.vocabulary = dataset.vocabulary;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t which = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    out[which].items.push_back(dataset.items[order[i]]);
  }
  return out;
}

TagStats tag_stats(const Dataset& dataset) {
  if (dataset.items.empty()) throw DataError("tag_stats needs a non-empty dataset");
  TagStats stats;
  stats.per_tag_counts.assign(static_cast<std::size_t>(dataset.vocabulary.size()), 0);
  std::map<int, std::size_t> per_item;
  for (const auto& item : dataset.items) {
    for (int t : item.tags) ++stats.per_tag_counts[static_cast<std::size_t>(t)];
    ++per_item[static_cast<int>(item.tags.size())];
  }
  const double n = static_cast<double>(dataset.items.size());
  for (const auto& [k, c] : per_item) stats.tags_per_item_percent[k] = 100.0 * static_cast<double>(c) / n;

  std::size_t words = 0;
  for (const auto& tag : dataset.vocabulary.tags()) {
    std::istringstream ss(tag);
    std::string w;
    while (ss >> w) ++words;
  }
  stats.mean_tag_length_words =
      static_cast<double>(words) / static_cast<double>(dataset.vocabulary.size());
  return stats;
}

}  // namespace sticker
