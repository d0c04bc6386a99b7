#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cst/episodes/episode.hpp"
#include "cst/objective/objective.hpp"

namespace cst::metrics {

struct MetricReport {
  double exact_ratio = 0.0;  // percent
  double miou = 0.0;         // percent
  std::map<int, double> per_class_iou;  // percent, classes with union > 0
  std::size_t episodes = 0;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

class MetricAccumulator {
 public:
  MetricAccumulator() = default;
  // Restricts updates to a known class registry; unknown ids then throw.
  explicit MetricAccumulator(std::vector<int> registry);

  // `query_seg_gt` holds (N+1)-way labels of the query; episode.classes maps
  // label n + 1 to its global class id.
  void update(const objective::EpisodePrediction& pred, const data::Episode& episode,
              const std::vector<int>& query_seg_gt);
  void merge(const MetricAccumulator& other);
  MetricReport finalize() const;

  std::uint64_t exact_matches() const { return exact_; }
  std::uint64_t episode_count() const { return episodes_; }
  std::uint64_t intersection(int cls) const;
  std::uint64_t union_count(int cls) const;

 private:
  bool restricted_ = false;
  std::vector<int> registry_;
  std::uint64_t exact_ = 0, episodes_ = 0;
  std::map<int, std::uint64_t> inter_, union_;
};

}  // namespace cst::metrics
