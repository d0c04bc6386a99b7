#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cst/backbone/tokens.hpp"
#include "cst/numerics/param_store.hpp"
#include "cst/numerics/tensor.hpp"
#include "cst/pseudomask/mask_map.hpp"

namespace cst::pseudo {

// Per-head cosine between image-token keys and the support class-token query.
struct AttentionStack {
  std::size_t heads = 0, grid_h = 0, grid_w = 0;
  std::vector<double> scores;  // [heads][grid_h * grid_w]

  std::size_t tokens() const { return grid_h * grid_w; }
  double at(std::size_t head, std::size_t p) const { return scores[head * tokens() + p]; }
};

enum class AttentionMode { kSelf, kCross };

inline constexpr double kDefaultAlpha = -0.1;

// kSelf scores the support's own keys, kCross the image's keys, both against
// the support's class-token query.
AttentionStack attention_scores(const backbone::TokenBundle& image,
                                const backbone::TokenBundle& support, AttentionMode mode);

// Head-averaged scores resized to the target and thresholded at > alpha.
// A query whose image-level label is 0 yields an all-background mask.
MaskMap raw_pseudomask(const AttentionStack& stack, bool is_query, bool y_clf_gt,
                       std::size_t target_h, std::size_t target_w, double alpha = kDefaultAlpha);

struct EnhancerConfig {
  std::size_t hidden = 32;
  double lr = 1e-3;
  std::size_t steps = 200;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
};

inline const std::string kEnhancerPrefix = "enhancer.";

void init_enhancer(num::ParamStore& store, std::size_t heads, std::size_t hidden,
                   std::uint64_t seed);

// Sigmoid foreground probability [target_h, target_w].
num::Tensor enhancer_probability(const AttentionStack& stack, const num::ParamStore& params,
                                 std::size_t target_h, std::size_t target_w);

// Binary mask: probability >= 0.5 is foreground.
MaskMap enhance(const AttentionStack& stack, const num::ParamStore& params, std::size_t target_h,
                std::size_t target_w);

struct EnhancerPair {
  AttentionStack stack;
  MaskMap gt;
};

// Mean per-pixel BCE of the enhancer over the given pairs.
double enhancer_loss(const std::vector<EnhancerPair>& pairs, const num::ParamStore& params);

// Adam on per-pixel BCE over seeded minibatches. Throws kEmptyDataset.
num::ParamStore train_enhancer(const std::vector<EnhancerPair>& pairs, const EnhancerConfig& cfg);

// 0/255 PGM export of a binary mask.
void export_mask_pgm(const MaskMap& mask, const std::string& path);

}  // namespace cst::pseudo
