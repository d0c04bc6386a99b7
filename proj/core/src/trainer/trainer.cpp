#include "cst/trainer/trainer.hpp"

#include <exception>
#include <fstream>
#include <thread>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "json.hpp"

namespace cst::train {

using data::SupervisionMode;
using nlohmann::json;

SupervisionResolver::SupervisionResolver(data::SupervisionRegime regime, double alpha,
                                         std::shared_ptr<const num::ParamStore> enhancer,
                                         bool test_time)
    : regime_(regime),
      alpha_(alpha),
      enhancer_(std::move(enhancer)),
      test_time_(test_time),
      gt_reads_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (regime_.mode == SupervisionMode::kMixed && !enhancer_) {
    throw Error(ErrorCode::kConfigInvalid, "mixed supervision needs a trained mask enhancer");
  }
}

bool SupervisionResolver::uses_ground_truth(const data::ImageRecord& record) const {
  switch (regime_.mode) {
    case SupervisionMode::kPixel: return true;
    case SupervisionMode::kImage: return false;
    case SupervisionMode::kMixed: return !test_time_ && record.has_pixel_label;
  }
  return false;
}

MaskMap SupervisionResolver::pseudo(const pseudo::AttentionStack& stack, bool is_query,
                                    bool present, std::size_t h, std::size_t w) const {
  if (regime_.mode == SupervisionMode::kMixed) {
    if (is_query && !present) return MaskMap::zeros(h, w);
    return pseudo::enhance(stack, *enhancer_, h, w);
  }
  return pseudo::raw_pseudomask(stack, is_query, present, h, w, alpha_);
}

MaskMap SupervisionResolver::support_mask(const data::DatasetView& view, std::size_t record,
                                          int cls, std::size_t h, std::size_t w) const {
  if (uses_ground_truth(view.record(record))) {
    ++*gt_reads_;
    auto lm = view.labels(record);
    return MaskMap::binary_from(lm->height, lm->width, data::class_mask(lm->labels, cls))
        .resized(h, w);
  }
  const auto tokens = view.tokens(record);
  return pseudo(pseudo::attention_scores(*tokens, *tokens, pseudo::AttentionMode::kSelf), false,
                true, h, w);
}

MaskMap SupervisionResolver::query_target(const data::DatasetView& view, std::size_t query,
                                          std::size_t support, int cls, bool present) const {
  if (uses_ground_truth(view.record(query))) {
    ++*gt_reads_;
    auto lm = view.labels(query);
    return MaskMap::binary_from(lm->height, lm->width, data::class_mask(lm->labels, cls));
  }
  const auto [h, w] = view.image_size(query);
  const auto stack = pseudo::attention_scores(*view.tokens(query), *view.tokens(support),
                                              pseudo::AttentionMode::kCross);
  return pseudo(stack, true, present, h, w);
}

std::vector<pseudo::EnhancerPair> enhancer_pairs(const data::DatasetView& view) {
  std::vector<pseudo::EnhancerPair> pairs;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!view.record(i).has_pixel_label) continue;
    const auto tokens = view.tokens(i);
    const auto lm = view.labels(i);
    const int cls = backbone::LabeledGridImage::salient_class(lm->labels);
    pairs.push_back({pseudo::attention_scores(*tokens, *tokens, pseudo::AttentionMode::kSelf),
                     MaskMap::binary_from(lm->height, lm->width, data::class_mask(lm->labels, cls))});
  }
  return pairs;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigInvalid, m); };
  if (!(lr > 0.0)) fail("lr must be positive");
  if (steps == 0) fail("steps must be positive");
  if (accumulate == 0) fail("accumulate must be positive");
  if (val_way == 0 || val_shot == 0) fail("validation way/shot must be positive");
  if (log_interval == 0) fail("log_interval must be positive");
  if (workers == 0) fail("workers must be positive");
  if (!(alpha > -1.0 && alpha < 1.0)) fail("alpha must lie in (-1, 1)");
  if (regime.pixel_fraction < 0.0 || regime.pixel_fraction > 1.0)
    fail("pixel_fraction must lie in [0, 1]");
}

std::string HistoryRecord::to_json() const {
  json j{{"step", step}, {"loss_clf", loss_clf}, {"loss_seg", loss_seg}, {"loss_total", loss_total}};
  if (validated) {
    j["val_miou"] = val_miou;
    j["val_exact"] = val_exact;
    j["best_miou"] = best_miou;
  }
  return j.dump();
}

void write_history(const std::vector<HistoryRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  for (const auto& h : history) out << h.to_json() << '\n';
}

ShotPredictor model_predictor(const num::ParamStore& params, const ModelConfig& cfg) {
  return [&params, cfg](const ShotContext& ctx) {
    num::NoGradGuard guard;
    const auto support = ctx.episode.supports[ctx.n][ctx.k];
    const auto [h, w] = ctx.view.image_size(ctx.episode.query);
    auto pred = forward_pair(params, cfg, *ctx.view.tokens(ctx.episode.query),
                             *ctx.view.support_tokens(support, cfg.support_h, cfg.support_w),
                             ctx.support_mask, h, w);
    objective::ShotResponse r;
    r.clf = pred.clf_prob.item();
    r.height = h;
    r.width = w;
    r.seg.assign(pred.seg_prob.values().begin(), pred.seg_prob.values().end());
    return r;
  };
}

metrics::MetricReport evaluate_episodes(const ShotPredictor& predictor,
                                        const data::DatasetView& view,
                                        const std::vector<data::Episode>& episodes,
                                        const SupervisionResolver& resolver, double delta,
                                        std::size_t workers, std::size_t support_h,
                                        std::size_t support_w) {
  workers = std::max<std::size_t>(1, std::min(workers, episodes.size()));
  std::vector<metrics::MetricAccumulator> accs(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t wid) {
    try {
      for (std::size_t i = wid; i < episodes.size(); i += workers) {
        const auto& ep = episodes[i];
        std::vector<std::vector<objective::ShotResponse>> responses(ep.way);
        for (std::size_t n = 0; n < ep.way; ++n)
          for (std::size_t k = 0; k < ep.shot; ++k) {
            const auto mask = resolver.support_mask(view, ep.supports[n][k], ep.classes[n],
                                                    support_h, support_w);
            responses[n].push_back(predictor({view, ep, n, k, mask}));
          }
        const auto pred = objective::predict_episode(responses, delta);
        accs[wid].update(pred, ep, data::query_seg_labels(ep, view.labels(ep.query)->labels));
      }
    } catch (...) {
      errors[wid] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  metrics::MetricAccumulator total;
  for (const auto& a : accs) total.merge(a);
  return total.finalize();
}

metrics::MetricReport evaluate(const ShotPredictor& predictor, const data::DatasetView& view,
                               const SupervisionResolver& resolver, const EvalConfig& cfg,
                               std::size_t support_h, std::size_t support_w) {
  if (cfg.episodes == 0) throw Error(ErrorCode::kZeroEpisodes, "evaluate: zero episodes requested");
  std::vector<data::Episode> episodes;
  episodes.reserve(cfg.episodes);
  for (std::size_t i = 0; i < cfg.episodes; ++i)
    episodes.push_back(data::sample_episode(view.manifest(), cfg.way, cfg.shot,
                                            data::episode_seed(cfg.seed, i)));
  return evaluate_episodes(predictor, view, episodes, resolver, cfg.delta, cfg.workers, support_h,
                           support_w);
}

std::shared_ptr<const num::ParamStore> extract_enhancer(const num::ParamStore& params) {
  auto out = std::make_shared<num::ParamStore>();
  for (const auto& [name, t] : params.entries())
    if (name.rfind(pseudo::kEnhancerPrefix, 0) == 0) out->add(name, t.shape(), {t.values().begin(), t.values().end()});
  if (out->entries().empty()) return nullptr;
  return out;
}

namespace {

std::unique_ptr<data::DatasetView> flagged(const data::DatasetView& view,
                                          const data::SupervisionRegime& regime) {
  auto m = regime.mode == SupervisionMode::kMixed
               ? data::assign_mixed_labels(view.manifest(), regime.pixel_fraction)
               : view.manifest();
  return std::make_unique<data::DatasetView>(std::move(m), view.backbone(), view.signal());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const data::DatasetView& train_set,
                  const data::DatasetView* val_set, const ProgressFn& progress) {
  cfg.validate();
  if (train_set.size() == 0) throw Error(ErrorCode::kEmptyDataset, "train: empty training split");
  const auto view_ptr = flagged(train_set, cfg.regime);
  const auto& view = *view_ptr;
  std::unique_ptr<data::DatasetView> val_view;
  if (val_set) val_view = flagged(*val_set, cfg.regime);

  std::shared_ptr<const num::ParamStore> enhancer;
  if (cfg.regime.mode == SupervisionMode::kMixed) {
    auto pairs = enhancer_pairs(view);
    if (pairs.empty()) {
      throw Error(ErrorCode::kConfigInvalid,
                  "mixed supervision: pixel_fraction leaves no image with a ground-truth mask");
    }
    auto ecfg = cfg.enhancer;
    ecfg.seed = data::episode_seed(cfg.seed, 303 + cfg.enhancer.seed);
    enhancer = std::make_shared<const num::ParamStore>(pseudo::train_enhancer(pairs, ecfg));
  }
  const SupervisionResolver resolver(cfg.regime, cfg.alpha, enhancer);

  const auto& bb = view.backbone();
  num::ParamStore params = init_model(cfg.model, bb, cfg.seed);
  const auto& mc = cfg.model;

  TrainResult res;
  double best_miou = -1.0;
  auto keep_best = [&](std::size_t step) {
    res.best = params.clone();
    res.best_step = step;
  };
  keep_best(0);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    HistoryRecord rec;
    rec.step = step;
    try {
      for (std::size_t a = 0; a < cfg.accumulate; ++a) {
        std::size_t idx = (step - 1) * cfg.accumulate + a;
        if (cfg.episode_pool) idx %= cfg.episode_pool;
        const auto ep = data::sample_episode(view.manifest(), 1, 1, data::episode_seed(cfg.seed, idx));
        const std::size_t s = ep.supports[0][0], q = ep.query;
        const int cls = ep.classes[0];
        const bool present = ep.query_clf_gt[0] != 0;
        const auto mask = resolver.support_mask(view, s, cls, mc.support_h, mc.support_w);
        const auto target = resolver.query_target(view, q, s, cls, present);
        const auto pred = forward_pair(params, mc, *view.tokens(q),
                                       *view.support_tokens(s, mc.support_h, mc.support_w), mask,
                                       target.height, target.width);
        auto loss = objective::compute_loss(pred, present, target, cfg.lambda);
        num::backward(cfg.accumulate > 1
                          ? num::ops::scale(loss.total, 1.0 / static_cast<double>(cfg.accumulate))
                          : loss.total);
        rec.loss_clf += loss.loss_clf / static_cast<double>(cfg.accumulate);
        rec.loss_seg += loss.loss_seg / static_cast<double>(cfg.accumulate);
        rec.loss_total += loss.loss_total / static_cast<double>(cfg.accumulate);
      }
      num::adam_step(params, cfg.lr);

      if (val_view && cfg.val_interval && (step % cfg.val_interval == 0 || step == cfg.steps)) {
        EvalConfig ec{cfg.val_way, cfg.val_shot, cfg.val_episodes, cfg.workers,
                      data::episode_seed(cfg.seed, 404), cfg.delta};
        const auto report =
            evaluate(model_predictor(params, mc), *val_view, resolver, ec, mc.support_h, mc.support_w);
        rec.validated = true;
        rec.val_miou = report.miou;
        rec.val_exact = report.exact_ratio;
        if (report.miou > best_miou) {
          best_miou = report.miou;
          keep_best(step);
        }
        rec.best_miou = best_miou;
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::kTrainingFailed, "step " + std::to_string(step) + ": " +
                                                  std::string(code_name(e.code())) + ": " + e.what());
    }
    if (rec.validated || step % cfg.log_interval == 0 || step == cfg.steps) {
      res.history.push_back(rec);
      if (progress) progress(rec);
    }
  }
  res.final = params.clone();
  if (best_miou < 0.0) keep_best(cfg.steps);
  if (enhancer) {
    res.best.absorb(*enhancer);
    res.final.absorb(*enhancer);
  }
  res.ground_truth_reads = resolver.ground_truth_reads();
  return res;
}

}  // namespace cst::train
