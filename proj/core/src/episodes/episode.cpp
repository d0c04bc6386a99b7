#include "cst/episodes/episode.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cst/error.hpp"

namespace cst::data {

std::string to_string(SupervisionMode mode) {
  switch (mode) {
    case SupervisionMode::kImage: return "image";
    case SupervisionMode::kMixed: return "mixed";
    case SupervisionMode::kPixel: return "pixel";
  }
  return "?";
}

SupervisionMode parse_supervision(const std::string& text) {
  if (text == "image") return SupervisionMode::kImage;
  if (text == "mixed") return SupervisionMode::kMixed;
  if (text == "pixel") return SupervisionMode::kPixel;
  throw Error(ErrorCode::kConfigInvalid,
              "supervision must be one of image|mixed|pixel, got '" + text + "'");
}

Episode sample_episode(const DatasetManifest& manifest, std::size_t way, std::size_t shot,
                       std::uint64_t seed) {
  if (way == 0 || shot == 0) {
    throw Error(ErrorCode::kInvalidArgument, "sample_episode: way and shot must be positive");
  }
  if (manifest.records.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "sample_episode: manifest has no records");
  }
  if (manifest.classes.size() < way) {
    throw Error(ErrorCode::kInsufficientClasses,
                "sample_episode: split has " + std::to_string(manifest.classes.size()) +
                    " classes, episode needs " + std::to_string(way));
  }
  std::vector<int> eligible;
  std::map<int, std::vector<std::size_t>> by_class;
  for (int c : manifest.classes) {
    auto& v = by_class[c];
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].contains(c)) v.push_back(i);
    if (v.size() >= shot) eligible.push_back(c);
  }
  if (eligible.size() < way) {
    throw Error(ErrorCode::kInsufficientImages,
                "sample_episode: only " + std::to_string(eligible.size()) + " classes have " +
                    std::to_string(shot) + " images, episode needs " + std::to_string(way));
  }

  std::mt19937_64 rng(seed);
  auto draw = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  // partial Fisher-Yates: uniform without replacement
  for (std::size_t n = 0; n < way; ++n) {
    std::swap(eligible[n], eligible[n + draw(eligible.size() - n)]);
    ep.classes.push_back(eligible[n]);
  }
  std::set<std::size_t> used;
  for (int c : ep.classes) {
    std::vector<std::size_t> pool;
    for (std::size_t i : by_class[c])
      if (!used.count(i)) pool.push_back(i);
    if (pool.size() < shot) {
      throw Error(ErrorCode::kInsufficientImages,
                  "sample_episode: class " + std::to_string(c) + " has too few unused images");
    }
    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < shot; ++k) {
      std::swap(pool[k], pool[k + draw(pool.size() - k)]);
      chosen.push_back(pool[k]);
      used.insert(pool[k]);
    }
    ep.supports.push_back(std::move(chosen));
  }
  std::vector<std::size_t> query_pool;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    if (!used.count(i)) query_pool.push_back(i);
  if (query_pool.empty()) {
    throw Error(ErrorCode::kInsufficientImages, "sample_episode: no image left for the query");
  }
  ep.query = query_pool[draw(query_pool.size())];
  for (int c : ep.classes)
    ep.query_clf_gt.push_back(manifest.records[ep.query].contains(c) ? 1 : 0);
  return ep;
}

std::vector<int> query_seg_labels(const Episode& episode, const std::vector<int>& labels) {
  const int bg = static_cast<int>(episode.way) + 1;
  std::vector<int> out(labels.size(), bg);
  for (std::size_t p = 0; p < labels.size(); ++p)
    for (std::size_t n = 0; n < episode.classes.size(); ++n)
      if (labels[p] == episode.classes[n]) out[p] = static_cast<int>(n) + 1;
  return out;
}

std::vector<std::uint8_t> class_mask(const std::vector<int>& labels, int cls) {
  std::vector<std::uint8_t> m(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) m[p] = labels[p] == cls;
  return m;
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + index + 1;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace cst::data
