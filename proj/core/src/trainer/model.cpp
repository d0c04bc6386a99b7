#include "cst/trainer/model.hpp"

#include "cst/correlation/correlation.hpp"
#include "cst/episodes/episode.hpp"
#include "cst/error.hpp"
#include "json.hpp"

namespace cst::train {

model::CorrTransformerConfig ModelConfig::transformer(
    const backbone::BackboneConfig& backbone) const {
  model::CorrTransformerConfig c;
  c.attn_heads = attn_heads;
  c.in_channels = use_multihead ? backbone.layers * backbone.heads : backbone.layers;
  c.out_channels = out_channels;
  c.pool_kernels = pool_kernels;
  c.support_h = support_h;
  c.support_w = support_w;
  c.decoupled_heads = decoupled_heads;
  return c;
}

model::HeadsConfig ModelConfig::heads() const { return {out_channels, out_channels, decoupled_heads}; }

void ModelConfig::validate(const backbone::BackboneConfig& backbone) const {
  backbone.validate();
  transformer(backbone).validate();
}

num::ParamStore init_model(const ModelConfig& cfg, const backbone::BackboneConfig& backbone,
                           std::uint64_t seed) {
  cfg.validate(backbone);
  num::ParamStore store;
  model::init_corr_transformer(store, cfg.transformer(backbone), data::episode_seed(seed, 101));
  model::init_heads(store, cfg.heads(), data::episode_seed(seed, 202));
  return store;
}

model::PredictionPair forward_pair(const num::ParamStore& params, const ModelConfig& cfg,
                                   const backbone::TokenBundle& query,
                                   const backbone::TokenBundle& support,
                                   const MaskMap& support_mask, std::size_t out_h,
                                   std::size_t out_w) {
  if (support.grid_h != cfg.support_h || support.grid_w != cfg.support_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "forward: support grid " + std::to_string(support.grid_h) + "x" +
                    std::to_string(support.grid_w) + " differs from the configured " +
                    std::to_string(cfg.support_h) + "x" + std::to_string(cfg.support_w));
  }
  const auto volume = corr::correlate(query, support, cfg.use_multihead);
  const auto tcfg = cfg.transformer(query.config());
  const auto maps = model::corr_transformer_forward(volume, support_mask, params, tcfg);
  model::PredictionPair out;
  out.seg_prob = model::segment(maps.seg_map, out_h, out_w, params);
  out.clf_prob = cfg.decoupled_heads ? model::classify(maps.clf_map, params)
                                     : model::coupled_classify(out.seg_prob);
  return out;
}

std::string param_report(const num::ParamStore& params) {
  const auto counts = model::count_params(params);
  const std::map<std::string, std::size_t> reference{
      {"transformer", kReferenceTransformerParams},
      {"clf_head", kReferenceClfHeadParams},
      {"seg_head", kReferenceSegHeadParams},
      {"total", kReferenceTotalParams}};
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, n] : counts) {
    nlohmann::json e{{"count", n}};
    if (auto it = reference.find(name); it != reference.end()) {
      e["reference"] = it->second;
      e["ratio"] = static_cast<double>(n) / static_cast<double>(it->second);
    }
    j[name] = e;
  }
  return j.dump(2);
}

}  // namespace cst::train
