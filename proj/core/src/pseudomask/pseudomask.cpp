#include "cst/pseudomask/pseudomask.hpp"

#include <cmath>
#include <random>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "cst/pgm.hpp"
#include "layers.hpp"

namespace cst::pseudo {

namespace ops = num::ops;
using num::Tensor;

AttentionStack attention_scores(const backbone::TokenBundle& image,
                                const backbone::TokenBundle& support, AttentionMode mode) {
  const auto& keys = mode == AttentionMode::kSelf ? support : image;
  keys.check_consistent();
  support.check_consistent();
  if (keys.heads != support.heads || keys.head_dim != support.head_dim) {
    throw Error(ErrorCode::kShapeMismatch,
                "attention_scores: image has " + std::to_string(keys.heads) + " heads of dim " +
                    std::to_string(keys.head_dim) + ", support has " +
                    std::to_string(support.heads) + " of dim " + std::to_string(support.head_dim));
  }
  const std::size_t c = keys.head_dim, t = keys.tokens();
  AttentionStack st{keys.heads, keys.grid_h, keys.grid_w, std::vector<double>(keys.heads * t)};
  for (std::size_t m = 0; m < keys.heads; ++m) {
    const float* q = support.query_rows(m).data();
    const float* k = keys.key_rows(m).data() + c;
    double qn = 0.0;
    for (std::size_t j = 0; j < c; ++j) qn += double(q[j]) * q[j];
    qn = std::sqrt(qn);
    for (std::size_t p = 0; p < t; ++p) {
      double dot = 0.0, kn = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        dot += double(k[p * c + j]) * q[j];
        kn += double(k[p * c + j]) * k[p * c + j];
      }
      kn = std::sqrt(kn);
      st.scores[m * t + p] =
          (qn < ops::kNormEpsilon || kn < ops::kNormEpsilon) ? 0.0 : dot / (qn * kn);
    }
  }
  return st;
}

MaskMap raw_pseudomask(const AttentionStack& stack, bool is_query, bool y_clf_gt,
                       std::size_t target_h, std::size_t target_w, double alpha) {
  if (!(alpha > -1.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "raw_pseudomask: alpha must lie in (-1, 1)");
  }
  if (stack.heads == 0 || stack.scores.size() != stack.heads * stack.tokens()) {
    throw Error(ErrorCode::kShapeMismatch, "raw_pseudomask: malformed attention stack");
  }
  if (is_query && !y_clf_gt) return MaskMap::zeros(target_h, target_w);
  const std::size_t t = stack.tokens();
  std::vector<double> avg(t, 0.0);
  for (std::size_t m = 0; m < stack.heads; ++m)
    for (std::size_t p = 0; p < t; ++p) avg[p] += stack.scores[m * t + p];
  for (double& v : avg) v /= static_cast<double>(stack.heads);
  num::NoGradGuard no_grad;
  auto up = ops::bilinear_resize(Tensor::from({1, stack.grid_h, stack.grid_w}, std::move(avg)),
                                 target_h, target_w);
  MaskMap out = MaskMap::zeros(target_h, target_w);
  auto v = up.values();
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = v[i] > alpha ? 1.0 : 0.0;
  return out;
}

void init_enhancer(num::ParamStore& store, std::size_t heads, std::size_t hidden,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  layers::add_conv(store, kEnhancerPrefix + "conv1", heads, hidden, 3, rng);
  layers::add_conv(store, kEnhancerPrefix + "conv2", hidden, hidden, 3, rng);
  layers::add_conv(store, kEnhancerPrefix + "conv3", hidden, 1, 3, rng);
}

Tensor enhancer_probability(const AttentionStack& stack, const num::ParamStore& params,
                            std::size_t target_h, std::size_t target_w) {
  const auto& w1 = params.get(kEnhancerPrefix + "conv1.w");
  if (w1.dim(1) != stack.heads) {
    throw Error(ErrorCode::kShapeMismatch, "enhance: stack has " + std::to_string(stack.heads) +
                                               " channels, enhancer expects " +
                                               std::to_string(w1.dim(1)));
  }
  auto x = Tensor::from({stack.heads, stack.grid_h, stack.grid_w}, stack.scores);
  auto h = ops::relu(layers::conv(params, kEnhancerPrefix + "conv1", x));
  h = ops::relu(layers::conv(params, kEnhancerPrefix + "conv2", h));
  auto p = ops::sigmoid(layers::conv(params, kEnhancerPrefix + "conv3", h));
  if (stack.grid_h != target_h || stack.grid_w != target_w) {
    p = ops::bilinear_resize(p, target_h, target_w);
  }
  return ops::reshape(p, {target_h, target_w});
}

MaskMap enhance(const AttentionStack& stack, const num::ParamStore& params, std::size_t target_h,
                std::size_t target_w) {
  num::NoGradGuard no_grad;
  auto p = enhancer_probability(stack, params, target_h, target_w);
  MaskMap out = MaskMap::zeros(target_h, target_w);
  auto v = p.values();
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = v[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

namespace {

Tensor pair_loss(const EnhancerPair& pair, const num::ParamStore& params) {
  auto p = enhancer_probability(pair.stack, params, pair.gt.height, pair.gt.width);
  return ops::binary_cross_entropy(p, pair.gt.values);
}

}  // namespace

double enhancer_loss(const std::vector<EnhancerPair>& pairs, const num::ParamStore& params) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "enhancer_loss: no pairs");
  num::NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& pair : pairs) total += pair_loss(pair, params).item();
  return total / static_cast<double>(pairs.size());
}

num::ParamStore train_enhancer(const std::vector<EnhancerPair>& pairs, const EnhancerConfig& cfg) {
  if (pairs.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "train_enhancer: no (attention, mask) pairs");
  }
  if (cfg.batch == 0 || cfg.lr <= 0.0) {
    throw Error(ErrorCode::kConfigInvalid, "train_enhancer: batch and lr must be positive");
  }
  num::ParamStore params;
  init_enhancer(params, pairs.front().stack.heads, cfg.hidden, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  const std::size_t batch = std::min(cfg.batch, pairs.size());
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor loss;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = batch == pairs.size() ? order[b] : pick(rng);
      auto l = pair_loss(pairs[idx], params);
      loss = loss.defined() ? ops::add(loss, l) : l;
    }
    num::backward(ops::scale(loss, 1.0 / static_cast<double>(batch)));
    num::adam_step(params, cfg.lr);
  }
  return params;
}

void export_mask_pgm(const MaskMap& mask, const std::string& path) {
  mask.validate();
  GrayImage img{mask.height, mask.width, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask.values[i] > 0.5 ? 255 : 0;
  write_pgm(path, img);
}

}  // namespace cst::pseudo
