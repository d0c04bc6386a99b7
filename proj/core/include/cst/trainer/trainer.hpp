#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cst/episodes/dataset.hpp"
#include "cst/episodes/episode.hpp"
#include "cst/metrics/metrics.hpp"
#include "cst/objective/objective.hpp"
#include "cst/pseudomask/pseudomask.hpp"
#include "cst/trainer/model.hpp"

namespace cst::train {

// Decides where every mask the model sees comes from: ground truth, raw
// attention pseudo-masks or enhanced pseudo-masks.
class SupervisionResolver {
 public:
  // test_time: only the pixel regime may read ground truth, regardless of
  // per-record flags.
  SupervisionResolver(data::SupervisionRegime regime, double alpha,
                      std::shared_ptr<const num::ParamStore> enhancer, bool test_time = false);

  bool uses_ground_truth(const data::ImageRecord& record) const;

  // Binary support mask of `cls` on an h x w grid.
  MaskMap support_mask(const data::DatasetView& view, std::size_t record, int cls, std::size_t h,
                       std::size_t w) const;
  // Segmentation target for the query at its label resolution.
  MaskMap query_target(const data::DatasetView& view, std::size_t query, std::size_t support,
                       int cls, bool present) const;

  std::uint64_t ground_truth_reads() const { return gt_reads_->load(); }
  const data::SupervisionRegime& regime() const { return regime_; }

 private:
  MaskMap pseudo(const pseudo::AttentionStack& stack, bool is_query, bool present, std::size_t h,
                 std::size_t w) const;

  data::SupervisionRegime regime_;
  double alpha_;
  std::shared_ptr<const num::ParamStore> enhancer_;
  bool test_time_;
  std::shared_ptr<std::atomic<std::uint64_t>> gt_reads_;
};

// Enhancer pairs: self-attention stacks of pixel-flagged records against
// their salient-class ground truth.
std::vector<pseudo::EnhancerPair> enhancer_pairs(const data::DatasetView& view);

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double lambda = objective::kDefaultLambda;
  double delta = objective::kDefaultDelta;
  double alpha = pseudo::kDefaultAlpha;
  std::size_t steps = 2000;
  std::size_t accumulate = 1;     // episodes per optimizer step
  std::size_t episode_pool = 0;   // > 0: cycle through this many fixed episodes
  std::size_t val_interval = 200;
  std::size_t val_episodes = 100;
  std::size_t val_way = 1, val_shot = 1;
  std::size_t log_interval = 1;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  data::SupervisionRegime regime;
  pseudo::EnhancerConfig enhancer;

  void validate() const;
};

struct HistoryRecord {
  std::size_t step = 0;
  double loss_clf = 0.0, loss_seg = 0.0, loss_total = 0.0;
  bool validated = false;
  double val_miou = 0.0, val_exact = 0.0, best_miou = 0.0;

  std::string to_json() const;  // one line
};

struct TrainResult {
  num::ParamStore best;   // model parameters, plus the enhancer in mixed mode
  num::ParamStore final;
  std::vector<HistoryRecord> history;
  std::size_t best_step = 0;
  std::uint64_t ground_truth_reads = 0;  // on the model path
};

using ProgressFn = std::function<void(const HistoryRecord&)>;

// `train_set`/`val_set` carry the backbone used to materialise tokens.
TrainResult train(const TrainConfig& cfg, const data::DatasetView& train_set,
                  const data::DatasetView* val_set, const ProgressFn& progress = {});

void write_history(const std::vector<HistoryRecord>& history, const std::string& path);

// Everything one support shot needs.
struct ShotContext {
  const data::DatasetView& view;
  const data::Episode& episode;
  std::size_t n, k;
  const MaskMap& support_mask;
};
using ShotPredictor = std::function<objective::ShotResponse(const ShotContext&)>;

ShotPredictor model_predictor(const num::ParamStore& params, const ModelConfig& cfg);

struct EvalConfig {
  std::size_t way = 1, shot = 1, episodes = 100, workers = 1;
  std::uint64_t seed = 0;
  double delta = objective::kDefaultDelta;
};

metrics::MetricReport evaluate_episodes(const ShotPredictor& predictor,
                                        const data::DatasetView& view,
                                        const std::vector<data::Episode>& episodes,
                                        const SupervisionResolver& resolver, double delta,
                                        std::size_t workers, std::size_t support_h,
                                        std::size_t support_w);

// Samples cfg.episodes episodes with episode_seed(cfg.seed, i).
metrics::MetricReport evaluate(const ShotPredictor& predictor, const data::DatasetView& view,
                               const SupervisionResolver& resolver, const EvalConfig& cfg,
                               std::size_t support_h, std::size_t support_w);

// Enhancer parameters carried inside a combined checkpoint, if any.
std::shared_ptr<const num::ParamStore> extract_enhancer(const num::ParamStore& params);

}  // namespace cst::train
