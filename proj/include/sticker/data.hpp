#pragma once

// Sticker corpus representation: images, tag vocabulary, manifests, splits
// and corpus statistics.

#include "sticker/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sticker {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StickerImage {
  std::string id;
  Image pixels;
  std::map<std::string, std::string> meta;
};

class TagVocabulary {
 public:
  TagVocabulary() = default;
  explicit TagVocabulary(std::vector<std::string> tags);

  static TagVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(tags_.size()); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }

  /// Id of `tag`, or -1 when absent.
  int find(const std::string& tag) const;
  int id(const std::string& tag) const;

  /// Stable digest of the ordered tag list.
  std::string hash() const;

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

struct DatasetItem {
  StickerImage image;
  std::vector<int> tags;  // sorted, unique
};

struct Dataset {
  std::vector<DatasetItem> items;
  TagVocabulary vocabulary;

  std::size_t size() const { return items.size(); }
  /// Throws DataError when a structural invariant is broken.
  void validate() const;
};

/// Target size; non-positive values keep each image's native size.
struct LoadOptions {
  int height = 224;
  int width = 224;
};

struct ItemError {
  std::string id;
  std::string message;
};

struct LoadResult {
  Dataset dataset;
  std::vector<ItemError> errors;  // items skipped (e.g. unreadable image)
};

/// Reads a JSON-Lines manifest; image paths resolve against the manifest's
/// directory. Unknown tags and empty tag lists are hard errors.
LoadResult load_manifest(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& vocab_path, const LoadOptions& options = {});

/// Writes images/<id>.png, manifest.jsonl and vocab.txt under `dir`.
void write_manifest(const Dataset& dataset, const std::filesystem::path& dir);

/// Digest of the 8-bit quantized pixels.
std::string image_checksum(const Image& image);

/// Returns (train, val, test). `ratios` are (train, val, test); val and test
/// get floor(n * ratio), train keeps the remainder. Items are id-sorted before
/// the seeded shuffle, so manifest order does not matter.
std::array<Dataset, 3> split_dataset(const Dataset& dataset, const std::array<double, 3>& ratios,
                                     std::uint64_t seed);

struct TagStats {
  std::vector<int> per_tag_counts;
  std::map<int, double> tags_per_item_percent;
  double mean_tag_length_words = 0.0;
};

TagStats tag_stats(const Dataset& dataset);

}  // namespace sticker
