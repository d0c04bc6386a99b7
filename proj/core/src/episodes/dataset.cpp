#include "cst/episodes/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "cst/error.hpp"
#include "cst/pgm.hpp"
#include "json.hpp"

namespace cst::data {

namespace fs = std::filesystem;
using nlohmann::json;

bool ImageRecord::contains(int cls) const {
  return std::find(classes.begin(), classes.end(), cls) != classes.end();
}

namespace {

const std::string kSyntheticPrefix = "synthetic:";

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string resolve(const std::string& base, const std::string& rel) {
  if (base.empty() || fs::path(rel).is_absolute()) return rel;
  return (fs::path(base) / rel).string();
}

}  // namespace

void DatasetManifest::validate() const {
  std::set<int> split(classes.begin(), classes.end());
  for (const auto& r : records) {
    std::set<int> seen;
    for (int c : r.classes) {
      if (!seen.insert(c).second) {
        throw Error(ErrorCode::kInvalidArgument,
                    "manifest: record '" + r.name + "' lists class " + std::to_string(c) + " twice");
      }
      if (c <= 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "manifest: record '" + r.name + "' has non-positive class id");
      }
    }
    if (r.tokens.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "manifest: record '" + r.name + "' has no tokens");
    }
    if (r.mask.empty() && r.inline_labels.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "manifest: record '" + r.name + "' has no mask");
    }
  }
}

std::string DatasetManifest::to_json() const {
  json j;
  j["fold"] = fold;
  j["classes"] = classes;
  j["records"] = json::array();
  for (const auto& r : records) {
    json jr;
    jr["name"] = r.name;
    jr["classes"] = r.classes;
    jr["mask"] = r.mask.empty() ? json(nullptr) : json(r.mask);
    jr["tokens"] = r.tokens;
    j["records"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

void DatasetManifest::save(const std::string& path) const {
  const std::string text = to_json();
  io::write_file(path, std::vector<char>(text.begin(), text.end()));
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  const auto bytes = io::read_file(path, ErrorCode::kManifestNotFound);
  DatasetManifest m;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    m.fold = j.at("fold").get<int>();
    m.classes = j.at("classes").get<std::vector<int>>();
    for (const auto& jr : j.at("records")) {
      ImageRecord r;
      r.name = jr.at("name").get<std::string>();
      r.classes = jr.at("classes").get<std::vector<int>>();
      std::sort(r.classes.begin(), r.classes.end());
      if (jr.contains("mask") && !jr.at("mask").is_null()) r.mask = jr.at("mask").get<std::string>();
      r.tokens = jr.at("tokens").get<std::string>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": malformed manifest: " + e.what());
  }
  m.base_dir = fs::path(path).parent_path().string();
  m.validate();
  return m;
}

namespace {

backbone::LabeledGridImage random_image(std::mt19937_64& rng, std::size_t h, std::size_t w,
                                        const std::vector<int>& pool) {
  backbone::LabeledGridImage img{h, w, std::vector<int>(h * w, 0), 0};
  std::vector<int> classes = pool;
  std::shuffle(classes.begin(), classes.end(), rng);
  const std::size_t max_obj = std::min<std::size_t>(3, classes.size());
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_obj)(rng);
  const std::size_t lo = std::max<std::size_t>(1, std::min(h, w) / 5);
  const std::size_t hi_h = std::max(lo, h * 5 / 8), hi_w = std::max(lo, w * 5 / 8);
  for (std::size_t o = 0; o < n; ++o) {
    const std::size_t rh = std::uniform_int_distribution<std::size_t>(lo, hi_h)(rng);
    const std::size_t rw = std::uniform_int_distribution<std::size_t>(lo, hi_w)(rng);
    const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, h - rh)(rng);
    const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, w - rw)(rng);
    for (std::size_t y = y0; y < y0 + rh; ++y)
      for (std::size_t x = x0; x < x0 + rw; ++x) img.labels[y * w + x] = classes[o];
  }
  img.designated_class = backbone::LabeledGridImage::salient_class(img.labels);
  return img;
}

DatasetManifest make_split(const SyntheticDataSpec& spec, const std::string& split, int fold,
                           const std::vector<int>& pool, std::size_t count, std::uint64_t tag) {
  DatasetManifest m;
  m.fold = fold;
  m.classes = pool;
  std::mt19937_64 rng(splitmix(spec.seed ^ splitmix(tag)));
  for (std::size_t i = 0; i < count; ++i) {
    auto img = random_image(rng, spec.height, spec.width, pool);
    ImageRecord r;
    std::ostringstream name;
    name << split << "_" << std::setw(4) << std::setfill('0') << i;
    r.name = name.str();
    std::set<int> present;
    for (int c : img.labels)
      if (c > 0) present.insert(c);
    r.classes.assign(present.begin(), present.end());
    r.height = spec.height;
    r.width = spec.width;
    r.inline_labels = img.labels;
    r.mask = "masks/" + r.name + ".pgm";
    r.tokens = kSyntheticPrefix + std::to_string(splitmix(spec.seed ^ splitmix(tag * 7919 + i)) >> 1);
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticDataSpec& spec) {
  if (spec.num_classes < 4) {
    throw Error(ErrorCode::kInsufficientClasses,
                "synthetic dataset: need at least 4 classes for two disjoint splits, got " +
                    std::to_string(spec.num_classes));
  }
  if (spec.height < 4 || spec.width < 4) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic dataset: images must be at least 4x4");
  }
  std::vector<int> train_pool, test_pool;
  const int half = static_cast<int>(spec.num_classes / 2);
  for (int c = 1; c <= static_cast<int>(spec.num_classes); ++c)
    (c <= half ? train_pool : test_pool).push_back(c);
  SyntheticDataset ds;
  ds.train = make_split(spec, "train", 0, train_pool, spec.train_images, 1);
  ds.val = make_split(spec, "val", 1, test_pool, spec.val_images, 2);
  ds.test = make_split(spec, "test", 1, test_pool, spec.test_images, 3);
  return ds;
}

void write_synthetic_dataset(const SyntheticDataset& ds, const std::string& dir,
                             const backbone::BackboneConfig& backbone,
                             const backbone::SyntheticSignal& signal, bool materialize_tokens) {
  const std::pair<const char*, const DatasetManifest*> splits[] = {
      {"train.json", &ds.train}, {"val.json", &ds.val}, {"test.json", &ds.test}};
  for (const auto& [file, manifest] : splits) {
    DatasetManifest out = *manifest;
    for (auto& r : out.records) {
      GrayImage img{r.height, r.width, std::vector<std::uint8_t>(r.inline_labels.size())};
      for (std::size_t i = 0; i < r.inline_labels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(r.inline_labels[i]);
      write_pgm((fs::path(dir) / r.mask).string(), img);
      if (materialize_tokens) {
        DatasetView view(DatasetManifest{out.fold, out.classes, {r}, dir}, backbone, signal);
        r.tokens = "tokens/" + r.name + ".cstk";
        backbone::save_tokens(*view.tokens(0), (fs::path(dir) / r.tokens).string());
      }
      r.inline_labels.clear();
    }
    out.save((fs::path(dir) / file).string());
  }
}

DatasetManifest assign_mixed_labels(const DatasetManifest& manifest, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "assign_mixed_labels: p must lie in [0, 1]");
  }
  DatasetManifest out = manifest;
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const ImageRecord& a, const ImageRecord& b) { return a.name < b.name; });
  const auto flagged =
      static_cast<std::size_t>(std::floor(p * static_cast<double>(out.records.size()) + 1e-9));
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].has_pixel_label = i < flagged;
  return out;
}

DatasetView::DatasetView(DatasetManifest manifest, backbone::BackboneConfig backbone,
                         backbone::SyntheticSignal signal)
    : manifest_(std::move(manifest)), backbone_(backbone), signal_(signal) {}

std::shared_ptr<const LabelMap> DatasetView::labels(std::size_t i) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = labels_.find(i); it != labels_.end()) return it->second;
  }
  const auto& r = record(i);
  auto map = std::make_shared<LabelMap>();
  if (!r.inline_labels.empty()) {
    map->height = r.height;
    map->width = r.width;
    map->labels = r.inline_labels;
  } else {
    auto img = read_pgm(resolve(manifest_.base_dir, r.mask));
    map->height = img.height;
    map->width = img.width;
    map->labels.assign(img.pixels.begin(), img.pixels.end());
  }
  std::set<int> present;
  for (int c : map->labels)
    if (c > 0) present.insert(c);
  if (!std::equal(present.begin(), present.end(), r.classes.begin(), r.classes.end())) {
    throw Error(ErrorCode::kInvalidArgument,
                "record '" + r.name + "': mask classes disagree with listed classes");
  }
  std::lock_guard lock(mu_);
  return labels_.emplace(i, std::move(map)).first->second;
}

std::pair<std::size_t, std::size_t> DatasetView::image_size(std::size_t i) const {
  const auto& r = record(i);
  if (r.height && r.width) return {r.height, r.width};
  auto lm = labels(i);
  return {lm->height, lm->width};
}

std::shared_ptr<const backbone::TokenBundle> DatasetView::tokens(std::size_t i) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = tokens_.find(i); it != tokens_.end()) return it->second;
  }
  const auto& r = record(i);
  std::shared_ptr<const backbone::TokenBundle> bundle;
  if (r.tokens.rfind(kSyntheticPrefix, 0) == 0) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(r.tokens.substr(kSyntheticPrefix.size()));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "record '" + r.name + "': bad token reference '" +
                                                   r.tokens + "'");
    }
    auto lm = labels(i);
    backbone::LabeledGridImage img{lm->height, lm->width, lm->labels, 0};
    img.designated_class = backbone::LabeledGridImage::salient_class(img.labels);
    bundle = std::make_shared<backbone::TokenBundle>(
        backbone::synthetic_tokens(img, backbone_, seed, signal_));
  } else {
    bundle = std::make_shared<backbone::TokenBundle>(
        backbone::load_tokens(resolve(manifest_.base_dir, r.tokens)));
  }
  std::lock_guard lock(mu_);
  return tokens_.emplace(i, std::move(bundle)).first->second;
}

std::shared_ptr<const backbone::TokenBundle> DatasetView::support_tokens(std::size_t i,
                                                                         std::size_t h,
                                                                         std::size_t w) const {
  const auto key = std::make_tuple(i, h, w);
  {
    std::lock_guard lock(mu_);
    if (auto it = support_.find(key); it != support_.end()) return it->second;
  }
  auto resized =
      std::make_shared<backbone::TokenBundle>(backbone::resize_support_grid(*tokens(i), h, w));
  std::lock_guard lock(mu_);
  return support_.emplace(key, std::move(resized)).first->second;
}

}  // namespace cst::data
