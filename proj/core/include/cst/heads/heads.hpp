#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cst/numerics/param_store.hpp"
#include "cst/numerics/tensor.hpp"

namespace cst::model {

struct HeadsConfig {
  std::size_t in_channels = 128;
  std::size_t hidden = 128;
  bool decoupled = true;  // false: no classification head parameters
};

// clf_prob is a scalar tensor, seg_prob is [H, W].
struct PredictionPair {
  num::Tensor clf_prob;
  num::Tensor seg_prob;
};

inline const std::string kClfHeadPrefix = "clf_head.";
inline const std::string kSegHeadPrefix = "seg_head.";

void init_heads(num::ParamStore& store, const HeadsConfig& cfg, std::uint64_t seed);

// [C', H, W] -> foreground probability (conv1x1, ReLU, conv1x1 to 2, GAP, softmax).
num::Tensor classify(const num::Tensor& clf_map, const num::ParamStore& params);

// [C', h, w] -> [H, W] foreground probability (conv3x3, ReLU, conv3x3 to 2,
// per-pixel softmax, bilinear upsample).
num::Tensor segment(const num::Tensor& seg_map, std::size_t out_h, std::size_t out_w,
                    const num::ParamStore& params);

// Spatial mean of a segmentation probability map.
num::Tensor coupled_classify(const num::Tensor& seg_prob);

}  // namespace cst::model
