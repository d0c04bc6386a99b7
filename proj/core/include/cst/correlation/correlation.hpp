#pragma once

#include <cstddef>
#include <vector>

#include "cst/backbone/tokens.hpp"
#include "cst/numerics/tensor.hpp"

namespace cst::corr {

// Cosine correlations between every query image token and the support's class
// token (cls_corr) and image tokens (img_corr), one channel per (layer, head).
// Channel index is layer * heads + head.
struct CorrelationVolume {
  std::size_t t_q = 0, t_s = 0, heads = 0, layers = 0;
  std::size_t query_h = 0, query_w = 0, support_h = 0, support_w = 0;
  std::vector<double> cls_corr;  // [t_q][channels]
  std::vector<double> img_corr;  // [t_q][t_s][channels]

  std::size_t channels() const { return heads * layers; }
  double cls(std::size_t i, std::size_t ch) const { return cls_corr[i * channels() + ch]; }
  double img(std::size_t i, std::size_t j, std::size_t ch) const {
    return img_corr[(i * t_s + j) * channels() + ch];
  }
};

// With use_multihead = false the M head slices of each layer are concatenated
// into one C*M token before normalisation, leaving `layers` channels.
CorrelationVolume correlate(const backbone::TokenBundle& query,
                            const backbone::TokenBundle& support, bool use_multihead = true);

// Correlation tokens for query position i: [1 + t_s, channels], row 0 from
// cls_corr. Constant (no gradient).
num::Tensor assemble_z0(const CorrelationVolume& volume, std::size_t query_index);

// All query positions at once: [t_q, 1 + t_s, channels].
num::Tensor assemble_z0_batch(const CorrelationVolume& volume);

}  // namespace cst::corr
