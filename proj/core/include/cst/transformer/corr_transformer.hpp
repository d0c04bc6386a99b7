#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cst/correlation/correlation.hpp"
#include "cst/numerics/param_store.hpp"
#include "cst/numerics/tensor.hpp"
#include "cst/pseudomask/mask_map.hpp"

namespace cst::model {

struct CorrTransformerConfig {
  std::size_t attn_heads = 4;
  std::size_t in_channels = 72;
  std::size_t out_channels = 128;
  std::vector<std::size_t> pool_kernels{4, 3};
  std::size_t support_h = 12, support_w = 12;
  bool decoupled_heads = true;

  static constexpr std::size_t kLayers = 2;
  static constexpr std::size_t kNormGroups = 4;
  // Throws kConfigInvalid when pools do not tile the grid down to 1x1 or the
  // widths do not divide by the head / group counts.
  void validate() const;
};

// [C', H_q, W_q] maps. clf_map is undefined when heads are coupled.
struct TaskTokenMaps {
  num::Tensor clf_map;
  num::Tensor seg_map;
};

struct TransformerTrace {
  std::vector<std::size_t> token_counts;       // per query index, per stage
  std::vector<std::vector<std::uint8_t>> key_masks;  // mask seen by each layer
  std::vector<double> layer1_probs;            // [B, heads, Nq, Nk]
  std::size_t layer1_queries = 0, layer1_keys = 0;
};

inline const std::string kTransformerPrefix = "transformer.";

void init_corr_transformer(num::ParamStore& store, const CorrTransformerConfig& cfg,
                           std::uint64_t seed);

// z0: [B, 1 + T_s, in_channels] correlation tokens for B = query_h * query_w
// query positions. support_mask: binary map on the support token grid.
TaskTokenMaps corr_transformer_forward(const num::Tensor& z0, std::size_t query_h,
                                       std::size_t query_w, const MaskMap& support_mask,
                                       const num::ParamStore& params,
                                       const CorrTransformerConfig& cfg,
                                       TransformerTrace* trace = nullptr);

TaskTokenMaps corr_transformer_forward(const corr::CorrelationVolume& volume,
                                       const MaskMap& support_mask, const num::ParamStore& params,
                                       const CorrTransformerConfig& cfg,
                                       TransformerTrace* trace = nullptr);

// Learnable-parameter counts keyed by top-level component, plus "total".
std::map<std::string, std::size_t> count_params(const num::ParamStore& params);

}  // namespace cst::model
