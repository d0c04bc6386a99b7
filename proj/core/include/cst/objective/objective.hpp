#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cst/heads/heads.hpp"
#include "cst/numerics/tensor.hpp"
#include "cst/pseudomask/mask_map.hpp"

namespace cst::objective {

inline constexpr double kDefaultLambda = 0.1;
inline constexpr double kDefaultDelta = 0.5;

struct LossReport {
  num::Tensor total;  // differentiable, lambda * clf + seg
  double loss_clf = 0.0, loss_seg = 0.0, loss_total = 0.0, lambda = kDefaultLambda;
};

// Two-way cross-entropy on the presence probability plus mean per-pixel
// two-way cross-entropy on the foreground map.
LossReport compute_loss(const model::PredictionPair& pred, bool y_gt, const MaskMap& mask_gt,
                        double lambda = kDefaultLambda);

// Plain-number responses of one support (class n, shot k) for one query.
struct ShotResponse {
  double clf = 0.0;
  std::size_t height = 0, width = 0;
  std::vector<double> seg;  // [height * width]
};

struct EpisodePrediction {
  std::size_t way = 0, height = 0, width = 0;
  std::vector<std::uint8_t> clf_decision;        // [N]
  std::vector<int> seg_labels;                   // [H * W], 1..N+1
  std::vector<double> clf_response;              // [N], K-shot means
  std::vector<std::vector<double>> seg_response; // [N][H * W]
};

// responses[n][k]; presence is strict > delta; a pixel is background (N + 1)
// when every class response is <= delta, otherwise the lowest-index argmax.
EpisodePrediction predict_episode(const std::vector<std::vector<ShotResponse>>& responses,
                                  double delta = kDefaultDelta);

}  // namespace cst::objective
