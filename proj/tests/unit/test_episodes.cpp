#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cst/episodes/episode.hpp"
#include "cst/error.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cst::data;

SyntheticDataSpec small_spec(std::uint64_t seed) {
  SyntheticDataSpec s;
  s.train_images = 40;
  s.val_images = 10;
  s.test_images = 12;
  s.seed = seed;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(SyntheticData, RecordClassesMatchLabelMaps) {
  auto ds = generate_synthetic_dataset(small_spec(1));
  for (const auto* m : {&ds.train, &ds.val, &ds.test})
    for (const auto& r : m->records) {
      std::set<int> present;
      for (int c : r.inline_labels)
        if (c) present.insert(c);
      EXPECT_EQ(std::vector<int>(present.begin(), present.end()), r.classes) << r.name;
      EXPECT_FALSE(r.classes.empty());
      EXPECT_LE(r.classes.size(), 3u);
    }
}

TEST(SyntheticData, SplitsHaveDisjointClasses) {
  auto ds = generate_synthetic_dataset(small_spec(2));
  std::set<int> train(ds.train.classes.begin(), ds.train.classes.end());
  for (int c : ds.test.classes) EXPECT_FALSE(train.count(c));
  for (const auto& r : ds.train.records)
    for (int c : r.classes) EXPECT_TRUE(train.count(c));
  for (const auto& r : ds.test.records)
    for (int c : r.classes) EXPECT_FALSE(train.count(c));
  EXPECT_EQ(ds.test.classes, ds.val.classes);
}

TEST(SyntheticData, SameSeedSameManifest) {
  auto a = generate_synthetic_dataset(small_spec(3));
  auto b = generate_synthetic_dataset(small_spec(3));
  auto c = generate_synthetic_dataset(small_spec(4));
  EXPECT_EQ(a.train.to_json(), b.train.to_json());
  for (std::size_t i = 0; i < a.train.records.size(); ++i)
    EXPECT_EQ(a.train.records[i].inline_labels, b.train.records[i].inline_labels);
  EXPECT_NE(a.train.to_json(), c.train.to_json());
}

TEST(SyntheticData, TooFewClassesRejected) {
  auto s = small_spec(1);
  s.num_classes = 3;
  EXPECT_THROW(generate_synthetic_dataset(s), cst::Error);
}

TEST(SyntheticData, WrittenDatasetReloadsIdentically) {
  auto ds = generate_synthetic_dataset(small_spec(5));
  const auto dir = fs::temp_directory_path() / "cst_ds_roundtrip";
  fs::remove_all(dir);
  cst::backbone::BackboneConfig bb;
  write_synthetic_dataset(ds, dir.string(), bb, {}, true);
  auto loaded = DatasetManifest::load((dir / "test.json").string());
  ASSERT_EQ(loaded.records.size(), ds.test.records.size());
  DatasetView mem(ds.test, bb);
  DatasetView disk(loaded, bb);
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    EXPECT_EQ(disk.labels(i)->labels, mem.labels(i)->labels);
    EXPECT_EQ(*disk.tokens(i), *mem.tokens(i));
  }
  fs::remove_all(dir);
}

TEST(SyntheticData, GenerationIsByteIdenticalOnDisk) {
  const auto a = fs::temp_directory_path() / "cst_ds_a";
  const auto b = fs::temp_directory_path() / "cst_ds_b";
  for (const auto& d : {a, b}) {
    fs::remove_all(d);
    write_synthetic_dataset(generate_synthetic_dataset(small_spec(7)), d.string(), {}, {}, true);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_GT(files, 100u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Manifest, MissingFileIsNamed) {
  try {
    DatasetManifest::load("/nonexistent/manifest.json");
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kManifestNotFound);
  }
}

TEST(Manifest, DuplicateClassRejected) {
  DatasetManifest m;
  m.records.push_back({"a", {1, 1}, "m.pgm", "synthetic:1"});
  EXPECT_THROW(m.validate(), cst::Error);
}

TEST(SampleEpisode, SeededTwiceIsIdentical) {
  auto ds = generate_synthetic_dataset(small_spec(8));
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto a = sample_episode(ds.test, 2, 2, s);
    auto b = sample_episode(ds.test, 2, 2, s);
    EXPECT_EQ(a.classes, b.classes);
    EXPECT_EQ(a.supports, b.supports);
    EXPECT_EQ(a.query, b.query);
  }
}

TEST(SampleEpisode, TwoWayOnTwoClassFoldUsesDistinctClasses) {
  auto ds = generate_synthetic_dataset(small_spec(9));
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto e = sample_episode(ds.test, 2, 1, s);
    EXPECT_NE(e.classes[0], e.classes[1]);
  }
}

TEST(SampleEpisode, StructuralInvariants) {
  auto ds = generate_synthetic_dataset(small_spec(10));
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto e = sample_episode(ds.train, 2, 3, s);
    std::set<std::size_t> used;
    for (std::size_t n = 0; n < 2; ++n) {
      ASSERT_EQ(e.supports[n].size(), 3u);
      for (auto i : e.supports[n]) {
        EXPECT_TRUE(ds.train.records[i].contains(e.classes[n]));
        EXPECT_TRUE(used.insert(i).second);
      }
      EXPECT_EQ(e.query_clf_gt[n], ds.train.records[e.query].contains(e.classes[n]));
      EXPECT_NE(std::find(ds.train.classes.begin(), ds.train.classes.end(), e.classes[n]),
                ds.train.classes.end());
    }
    EXPECT_FALSE(used.count(e.query));
  }
}

TEST(SampleEpisode, SupportClassFrequencyIsUniform) {
  // four-class split, every image contains every class
  DatasetManifest m;
  m.classes = {1, 2, 3, 4};
  for (int i = 0; i < 10; ++i)
    m.records.push_back({"r" + std::to_string(i), {1, 2, 3, 4}, "", "synthetic:0", 2, 2, {1, 2, 3, 4}});
  std::map<int, int> count;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) ++count[sample_episode(m, 1, 1, episode_seed(11, s)).classes[0]];
  const double p = 0.25, mean = trials * p, sd = std::sqrt(trials * p * (1 - p));
  for (int c = 1; c <= 4; ++c) EXPECT_LT(std::abs(count[c] - mean), 3 * sd) << c;
}

TEST(SampleEpisode, InsufficientDataErrors) {
  auto ds = generate_synthetic_dataset(small_spec(12));
  try {
    sample_episode(ds.test, 3, 1, 0);
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kInsufficientClasses);
  }
  try {
    sample_episode(ds.test, 1, 500, 0);
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kInsufficientImages);
  }
}

TEST(QuerySegLabels, BackgroundIsWayPlusOne) {
  Episode e;
  e.way = 2;
  e.classes = {7, 3};
  EXPECT_EQ(query_seg_labels(e, {0, 3, 7, 5}), (std::vector<int>{3, 2, 1, 3}));
}

DatasetManifest named(std::vector<std::string> names) {
  DatasetManifest m;
  for (auto& n : names) m.records.push_back({n, {1}, "x.pgm", "synthetic:0"});
  return m;
}

TEST(MixedLabels, ExtremesAndFloor) {
  std::vector<std::string> names;
  for (int i = 0; i < 40; ++i) names.push_back("img" + std::to_string(100 + i));
  auto m = named(names);
  auto flags = [](const DatasetManifest& d) {
    std::size_t n = 0;
    for (auto& r : d.records) n += r.has_pixel_label;
    return n;
  };
  EXPECT_EQ(flags(assign_mixed_labels(m, 0.0)), 0u);
  EXPECT_EQ(flags(assign_mixed_labels(m, 1.0)), 40u);
  EXPECT_EQ(flags(assign_mixed_labels(m, 0.05)), 2u);
  EXPECT_THROW(assign_mixed_labels(m, 1.5), cst::Error);
}

TEST(MixedLabels, FlagsDependOnlyOnNames) {
  auto a = assign_mixed_labels(named({"d", "b", "a", "c", "e"}), 0.4);
  auto b = assign_mixed_labels(named({"e", "c", "a", "b", "d"}), 0.4);
  std::set<std::string> fa, fb;
  for (auto& r : a.records)
    if (r.has_pixel_label) fa.insert(r.name);
  for (auto& r : b.records)
    if (r.has_pixel_label) fb.insert(r.name);
  EXPECT_EQ(fa, (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(fa, fb);
}

TEST(Supervision, ParsesNames) {
  EXPECT_EQ(parse_supervision("mixed"), SupervisionMode::kMixed);
  EXPECT_EQ(to_string(SupervisionMode::kImage), "image");
  EXPECT_THROW(parse_supervision("weak"), cst::Error);
}

}  // namespace
