#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cst/backbone/tokens.hpp"
#include "cst/heads/heads.hpp"
#include "cst/numerics/param_store.hpp"
#include "cst/pseudomask/mask_map.hpp"
#include "cst/transformer/corr_transformer.hpp"

namespace cst::train {

struct ModelConfig {
  std::size_t out_channels = 128;
  std::size_t attn_heads = 4;
  std::vector<std::size_t> pool_kernels{4, 3};
  std::size_t support_h = 12, support_w = 12;
  bool decoupled_heads = true;
  bool use_multihead = true;

  // Correlation channel count follows the backbone: layers * heads, or just
  // layers in single-head mode.
  model::CorrTransformerConfig transformer(const backbone::BackboneConfig& backbone) const;
  model::HeadsConfig heads() const;
  void validate(const backbone::BackboneConfig& backbone) const;
};

// Transformer plus heads, seeded independently.
num::ParamStore init_model(const ModelConfig& cfg, const backbone::BackboneConfig& backbone,
                           std::uint64_t seed);

// One (query, support) pass. `support` must already sit on the support grid;
// `support_mask` is a binary map on that grid. Output maps are out_h x out_w.
model::PredictionPair forward_pair(const num::ParamStore& params, const ModelConfig& cfg,
                                   const backbone::TokenBundle& query,
                                   const backbone::TokenBundle& support,
                                   const MaskMap& support_mask, std::size_t out_h,
                                   std::size_t out_w);

// Published reference sizes of the full-scale model, used only for reporting.
inline constexpr std::size_t kReferenceTransformerParams = 77500;
inline constexpr std::size_t kReferenceClfHeadParams = 29100;
inline constexpr std::size_t kReferenceSegHeadParams = 259500;
inline constexpr std::size_t kReferenceTotalParams = 366000;

// JSON object: per component {"count", "reference", "ratio"}.
std::string param_report(const num::ParamStore& params);

}  // namespace cst::train
