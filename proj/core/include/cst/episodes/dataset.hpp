#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cst/backbone/tokens.hpp"

namespace cst::data {

struct ImageRecord {
  std::string name;
  std::vector<int> classes;       // distinct, ascending, background excluded
  std::string mask;               // PGM label map of class ids, relative to the manifest
  std::string tokens;             // CSTK path or "synthetic:<seed>"
  std::size_t height = 0, width = 0;
  std::vector<int> inline_labels; // used instead of `mask` when non-empty
  bool has_pixel_label = false;   // mixed supervision flag

  bool contains(int cls) const;
};

struct LabelMap {
  std::size_t height = 0, width = 0;
  std::vector<int> labels;
};

struct DatasetManifest {
  int fold = 0;
  std::vector<int> classes;
  std::vector<ImageRecord> records;
  std::string base_dir;  // where relative mask/token paths resolve

  // JSON: {"fold", "classes", "records": [{"name", "classes", "mask", "tokens"}]}
  static DatasetManifest load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_json() const;
  // Throws kInvalidArgument on duplicate record classes or classes outside the split.
  void validate() const;
};

struct SyntheticDataSpec {
  std::size_t train_images = 400;
  std::size_t val_images = 100;
  std::size_t test_images = 100;
  std::size_t num_classes = 4;
  std::size_t height = 16, width = 16;
  std::uint64_t seed = 0;
};

// Train uses the first half of the classes; val and test share the second.
struct SyntheticDataset {
  DatasetManifest train, val, test;
};

// In-memory dataset with inline label maps and synthetic token references.
SyntheticDataset generate_synthetic_dataset(const SyntheticDataSpec& spec);

// Writes masks/*.pgm, optional tokens/*.cstk and {train,val,test}.json under
// `dir`. With materialize_tokens = false records keep "synthetic:<seed>".
void write_synthetic_dataset(const SyntheticDataset& ds, const std::string& dir,
                             const backbone::BackboneConfig& backbone,
                             const backbone::SyntheticSignal& signal, bool materialize_tokens);

// Records sorted by name; the first floor(p * count) carry pixel labels.
DatasetManifest assign_mixed_labels(const DatasetManifest& manifest, double p);

// Resolves records to label maps and token bundles, caching both. Safe to
// share across threads.
class DatasetView {
 public:
  DatasetView(DatasetManifest manifest, backbone::BackboneConfig backbone,
              backbone::SyntheticSignal signal = {});

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.records.size(); }
  const ImageRecord& record(std::size_t i) const { return manifest_.records.at(i); }
  const backbone::BackboneConfig& backbone() const { return backbone_; }
  const backbone::SyntheticSignal& signal() const { return signal_; }
  // Pixel extents of record i.
  std::pair<std::size_t, std::size_t> image_size(std::size_t i) const;

  // Ground-truth label map of class ids.
  std::shared_ptr<const LabelMap> labels(std::size_t i) const;
  std::shared_ptr<const backbone::TokenBundle> tokens(std::size_t i) const;
  // Token bundle with its grid resampled for use as a support.
  std::shared_ptr<const backbone::TokenBundle> support_tokens(std::size_t i, std::size_t h,
                                                              std::size_t w) const;

 private:
  DatasetManifest manifest_;
  backbone::BackboneConfig backbone_;
  backbone::SyntheticSignal signal_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::shared_ptr<const LabelMap>> labels_;
  mutable std::map<std::size_t, std::shared_ptr<const backbone::TokenBundle>> tokens_;
  mutable std::map<std::tuple<std::size_t, std::size_t, std::size_t>,
                   std::shared_ptr<const backbone::TokenBundle>>
      support_;
};

}  // namespace cst::data
