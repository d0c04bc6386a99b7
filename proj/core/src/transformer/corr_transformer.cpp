#include "cst/transformer/corr_transformer.hpp"

#include <random>
#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "layers.hpp"

namespace cst::model {

namespace ops = num::ops;
using num::Tensor;

void CorrTransformerConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigInvalid, "corr_transformer: " + msg);
  };
  if (pool_kernels.size() != kLayers) fail("expected 2 pool kernels");
  if (in_channels == 0 || out_channels == 0) fail("channel counts must be positive");
  if (attn_heads == 0 || out_channels % attn_heads != 0)
    fail(std::to_string(out_channels) + " channels not divisible by " +
         std::to_string(attn_heads) + " attention heads");
  if (out_channels % kNormGroups != 0)
    fail(std::to_string(out_channels) + " channels not divisible by 4 norm groups");
  std::size_t h = support_h, w = support_w;
  for (std::size_t k : pool_kernels) {
    if (k == 0 || h % k != 0 || w % k != 0)
      fail("pool kernel " + std::to_string(k) + " does not tile " + std::to_string(h) + "x" +
           std::to_string(w));
    h /= k;
    w /= k;
  }
  if (h != 1 || w != 1) fail("pool kernels leave a " + std::to_string(h) + "x" + std::to_string(w) +
                             " grid instead of 1x1");
}

namespace {

std::string layer_name(std::size_t j) { return kTransformerPrefix + "l" + std::to_string(j + 1); }

// Average-pool then keep any window that saw foreground. Row 0 stays open.
std::vector<std::uint8_t> pool_mask(const std::vector<std::uint8_t>& mask, std::size_t h,
                                    std::size_t w, std::size_t k) {
  const std::size_t oh = h / k, ow = w / k;
  std::vector<std::uint8_t> out(1 + oh * ow, 0);
  out[0] = 1;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask[1 + y * w + x]) out[1 + (y / k) * ow + x / k] = 1;
  return out;
}

bool all_open(const std::vector<std::uint8_t>& mask) {
  for (auto v : mask)
    if (!v) return false;
  return true;
}

Tensor map_from_rows(const Tensor& z, std::size_t row, std::size_t h, std::size_t w) {
  auto rows = ops::select_row(z, row);  // [B, C']
  const std::size_t c = rows.dim(1);
  return ops::reshape(ops::transpose2d(rows), {c, h, w});
}

}  // namespace

void init_corr_transformer(num::ParamStore& store, const CorrTransformerConfig& cfg,
                           std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < CorrTransformerConfig::kLayers; ++j) {
    const std::string n = layer_name(j);
    const std::size_t in = j == 0 ? cfg.in_channels : cfg.out_channels;
    layers::add_linear(store, n + ".q", in, cfg.out_channels, rng);
    layers::add_linear(store, n + ".k", in, cfg.out_channels, rng);
    layers::add_linear(store, n + ".v", in, cfg.out_channels, rng);
    if (in != cfg.out_channels) layers::add_linear(store, n + ".shortcut", in, cfg.out_channels, rng);
    layers::add_linear(store, n + ".agg", cfg.out_channels, cfg.out_channels, rng);
    layers::add_linear(store, n + ".ff", cfg.out_channels, cfg.out_channels, rng);
    layers::add_group_norm(store, n + ".gn_attn", cfg.out_channels);
    layers::add_group_norm(store, n + ".gn_ff", cfg.out_channels);
  }
}

TaskTokenMaps corr_transformer_forward(const Tensor& z0, std::size_t query_h, std::size_t query_w,
                                       const MaskMap& support_mask, const num::ParamStore& params,
                                       const CorrTransformerConfig& cfg, TransformerTrace* trace) {
  cfg.validate();
  const std::size_t ts = cfg.support_h * cfg.support_w;
  if (z0.rank() != 3 || z0.dim(0) != query_h * query_w || z0.dim(1) != 1 + ts ||
      z0.dim(2) != cfg.in_channels) {
    throw Error(ErrorCode::kShapeMismatch,
                "corr_transformer: tokens " + num::shape_str(z0.shape()) + " do not match [" +
                    std::to_string(query_h * query_w) + ", " + std::to_string(1 + ts) + ", " +
                    std::to_string(cfg.in_channels) + "]");
  }
  if (support_mask.height != cfg.support_h || support_mask.width != cfg.support_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "corr_transformer: support mask " + std::to_string(support_mask.height) + "x" +
                    std::to_string(support_mask.width) + " does not match support grid " +
                    std::to_string(cfg.support_h) + "x" + std::to_string(cfg.support_w));
  }
  support_mask.validate();

  std::vector<std::uint8_t> mask(1 + ts, 1);
  for (std::size_t p = 0; p < ts; ++p) mask[1 + p] = support_mask.values[p] > 0.5;

  if (trace) {
    *trace = {};
    trace->token_counts.push_back(1 + ts);
  }
  Tensor z = z0;
  std::size_t gh = cfg.support_h, gw = cfg.support_w;
  for (std::size_t j = 0; j < CorrTransformerConfig::kLayers; ++j) {
    const std::string n = layer_name(j);
    const std::size_t k = cfg.pool_kernels[j];
    auto pooled = ops::pool_support_tokens(z, gh, gw, k);
    auto q = layers::linear(params, n + ".q", pooled);
    auto kk = layers::linear(params, n + ".k", z);
    auto v = layers::linear(params, n + ".v", z);
    std::vector<double>* probs = nullptr;
    if (trace) {
      trace->key_masks.push_back(mask);
      if (j == 0) {
        probs = &trace->layer1_probs;
        trace->layer1_queries = pooled.dim(1);
        trace->layer1_keys = z.dim(1);
      }
    }
    std::span<const std::uint8_t> key_mask;
    if (!all_open(mask)) key_mask = mask;
    auto attn = ops::masked_attention(q, kk, v, cfg.attn_heads, key_mask, probs);
    auto shortcut = params.contains(n + ".shortcut.w") ? layers::linear(params, n + ".shortcut", pooled)
                                                     : pooled;
    auto z1 = layers::group_norm(params, n + ".gn_attn",
                                 ops::add(layers::linear(params, n + ".agg", attn), shortcut),
                                 CorrTransformerConfig::kNormGroups);
    auto ff = ops::relu(layers::linear(params, n + ".ff", z1));
    z = layers::group_norm(params, n + ".gn_ff", ops::add(ff, z1),
                           CorrTransformerConfig::kNormGroups);
    mask = pool_mask(mask, gh, gw, k);
    gh /= k;
    gw /= k;
    if (trace) trace->token_counts.push_back(z.dim(1));
  }

  TaskTokenMaps out;
  if (cfg.decoupled_heads) out.clf_map = map_from_rows(z, 0, query_h, query_w);
  out.seg_map = map_from_rows(z, 1, query_h, query_w);
  return out;
}

TaskTokenMaps corr_transformer_forward(const corr::CorrelationVolume& volume,
                                       const MaskMap& support_mask, const num::ParamStore& params,
                                       const CorrTransformerConfig& cfg, TransformerTrace* trace) {
  if (volume.channels() != cfg.in_channels) {
    throw Error(ErrorCode::kShapeMismatch,
                "corr_transformer: volume has " + std::to_string(volume.channels()) +
                    " channels, expected " + std::to_string(cfg.in_channels));
  }
  if (volume.support_h != cfg.support_h || volume.support_w != cfg.support_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "corr_transformer: volume support grid " + std::to_string(volume.support_h) + "x" +
                    std::to_string(volume.support_w) + " does not match configured " +
                    std::to_string(cfg.support_h) + "x" + std::to_string(cfg.support_w));
  }
  return corr_transformer_forward(corr::assemble_z0_batch(volume), volume.query_h, volume.query_w,
                                  support_mask, params, cfg, trace);
}

std::map<std::string, std::size_t> count_params(const num::ParamStore& params) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& [name, t] : params.entries()) {
    counts[name.substr(0, name.find('.'))] += t.numel();
    total += t.numel();
  }
  counts["total"] = total;
  return counts;
}

}  // namespace cst::model
