#include "cst/heads/heads.hpp"

#include <random>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "layers.hpp"

namespace cst::model {

namespace ops = num::ops;
using num::Tensor;

void init_heads(num::ParamStore& store, const HeadsConfig& cfg, std::uint64_t seed) {
  if (cfg.in_channels == 0 || cfg.hidden == 0) {
    throw Error(ErrorCode::kConfigInvalid, "heads: widths must be positive");
  }
  std::mt19937_64 rng(seed);
  if (cfg.decoupled) {
    layers::add_conv(store, kClfHeadPrefix + "conv1", cfg.in_channels, cfg.hidden, 1, rng);
    layers::add_conv(store, kClfHeadPrefix + "conv2", cfg.hidden, 2, 1, rng);
  }
  layers::add_conv(store, kSegHeadPrefix + "conv1", cfg.in_channels, cfg.hidden, 3, rng);
  layers::add_conv(store, kSegHeadPrefix + "conv2", cfg.hidden, 2, 3, rng);
}

Tensor classify(const Tensor& clf_map, const num::ParamStore& params) {
  if (clf_map.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "classify: expected [C, H, W], got " + num::shape_str(clf_map.shape()));
  }
  auto h = ops::relu(layers::conv(params, kClfHeadPrefix + "conv1", clf_map));
  auto logits = ops::global_avg_pool(layers::conv(params, kClfHeadPrefix + "conv2", h));
  return ops::select0(ops::softmax(logits, 0), 1);
}

Tensor segment(const Tensor& seg_map, std::size_t out_h, std::size_t out_w,
               const num::ParamStore& params) {
  if (seg_map.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "segment: expected [C, H, W], got " + num::shape_str(seg_map.shape()));
  }
  if (out_h == 0 || out_w == 0) {
    throw Error(ErrorCode::kShapeMismatch, "segment: output size must be positive");
  }
  auto h = ops::relu(layers::conv(params, kSegHeadPrefix + "conv1", seg_map));
  auto logits = layers::conv(params, kSegHeadPrefix + "conv2", h);
  auto fg = ops::select0(ops::softmax(logits, 0), 1);  // [h, w]
  const std::size_t gh = fg.dim(0), gw = fg.dim(1);
  if (gh == out_h && gw == out_w) return fg;
  auto up = ops::bilinear_resize(ops::reshape(fg, {1, gh, gw}), out_h, out_w);
  return ops::reshape(up, {out_h, out_w});
}

Tensor coupled_classify(const Tensor& seg_prob) { return ops::mean(seg_prob); }

}  // namespace cst::model
