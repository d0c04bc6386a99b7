#include "cst/metrics/metrics.hpp"

#include <algorithm>

#include "cst/error.hpp"
#include "json.hpp"

namespace cst::metrics {

using nlohmann::json;

std::string MetricReport::to_json() const {
  json per = json::object();
  for (const auto& [cls, iou] : per_class_iou) per[std::to_string(cls)] = iou;
  json j{{"exact_ratio", exact_ratio}, {"miou", miou}, {"per_class_iou", per},
         {"episodes", episodes}};
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  try {
    auto j = json::parse(text);
    MetricReport r;
    r.exact_ratio = j.at("exact_ratio").get<double>();
    r.miou = j.at("miou").get<double>();
    r.episodes = j.at("episodes").get<std::size_t>();
    for (const auto& [k, v] : j.at("per_class_iou").items())
      r.per_class_iou[std::stoi(k)] = v.get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("metric report: ") + e.what());
  }
}

MetricAccumulator::MetricAccumulator(std::vector<int> registry)
    : restricted_(true), registry_(std::move(registry)) {
  std::sort(registry_.begin(), registry_.end());
}

void MetricAccumulator::update(const objective::EpisodePrediction& pred,
                               const data::Episode& episode,
                               const std::vector<int>& query_seg_gt) {
  if (pred.clf_decision.size() != episode.classes.size() ||
      episode.query_clf_gt.size() != episode.classes.size()) {
    throw Error(ErrorCode::kShapeMismatch, "metrics: way differs between prediction and episode");
  }
  if (pred.seg_labels.size() != query_seg_gt.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "metrics: prediction has " + std::to_string(pred.seg_labels.size()) +
                    " pixels, ground truth " + std::to_string(query_seg_gt.size()));
  }
  if (restricted_) {
    for (int c : episode.classes)
      if (!std::binary_search(registry_.begin(), registry_.end(), c))
        throw Error(ErrorCode::kUnknownClass,
                    "metrics: class " + std::to_string(c) + " is not in the registry");
  }
  bool exact = true;
  for (std::size_t n = 0; n < episode.classes.size(); ++n)
    exact = exact && (pred.clf_decision[n] != 0) == (episode.query_clf_gt[n] != 0);
  exact_ += exact ? 1 : 0;
  ++episodes_;
  for (std::size_t n = 0; n < episode.classes.size(); ++n) {
    const int label = static_cast<int>(n) + 1;
    std::uint64_t i = 0, u = 0;
    for (std::size_t p = 0; p < query_seg_gt.size(); ++p) {
      const bool a = pred.seg_labels[p] == label, b = query_seg_gt[p] == label;
      i += (a && b) ? 1 : 0;
      u += (a || b) ? 1 : 0;
    }
    inter_[episode.classes[n]] += i;
    union_[episode.classes[n]] += u;
  }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  exact_ += other.exact_;
  episodes_ += other.episodes_;
  for (const auto& [c, v] : other.inter_) inter_[c] += v;
  for (const auto& [c, v] : other.union_) union_[c] += v;
}

std::uint64_t MetricAccumulator::intersection(int cls) const {
  auto it = inter_.find(cls);
  return it == inter_.end() ? 0 : it->second;
}

std::uint64_t MetricAccumulator::union_count(int cls) const {
  auto it = union_.find(cls);
  return it == union_.end() ? 0 : it->second;
}

MetricReport MetricAccumulator::finalize() const {
  if (episodes_ == 0) throw Error(ErrorCode::kZeroEpisodes, "metrics: no episodes accumulated");
  MetricReport r;
  r.episodes = episodes_;
  r.exact_ratio = 100.0 * static_cast<double>(exact_) / static_cast<double>(episodes_);
  double sum = 0.0;
  for (const auto& [c, u] : union_) {
    if (u == 0) continue;
    const double iou = 100.0 * static_cast<double>(intersection(c)) / static_cast<double>(u);
    r.per_class_iou[c] = iou;
    sum += iou;
  }
  r.miou = r.per_class_iou.empty() ? 0.0 : sum / static_cast<double>(r.per_class_iou.size());
  return r;
}

}  // namespace cst::metrics
