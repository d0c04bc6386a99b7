#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cst/episodes/dataset.hpp"

namespace cst::data {

enum class SupervisionMode { kImage, kMixed, kPixel };

struct SupervisionRegime {
  SupervisionMode mode = SupervisionMode::kPixel;
  double pixel_fraction = 0.0;  // mixed only
};

std::string to_string(SupervisionMode mode);
SupervisionMode parse_supervision(const std::string& text);

// One N-way K-shot task. supports[n][k] is a record index whose designated
// class is classes[n]; query_clf_gt[n] = 1 iff the query contains classes[n].
struct Episode {
  std::size_t way = 0, shot = 0;
  std::vector<int> classes;
  std::vector<std::vector<std::size_t>> supports;
  std::size_t query = 0;
  std::vector<std::uint8_t> query_clf_gt;
};

// Classes chosen uniformly without replacement among those with >= K images;
// supports drawn without replacement; the query is uniform over the remaining
// images of the split.
Episode sample_episode(const DatasetManifest& manifest, std::size_t way, std::size_t shot,
                       std::uint64_t seed);

// (N+1)-way labels for the query: n + 1 for pixels of classes[n], N + 1 for
// everything else.
std::vector<int> query_seg_labels(const Episode& episode, const std::vector<int>& labels);

// Binary foreground map of one class.
std::vector<std::uint8_t> class_mask(const std::vector<int>& labels, int cls);

// Per-episode seed for index i of a stream seeded with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace cst::data
