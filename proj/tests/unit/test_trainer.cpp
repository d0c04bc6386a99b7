#include <gtest/gtest.h>

#include <filesystem>

#include "cst/error.hpp"
#include "cst/trainer/trainer.hpp"

namespace {

using namespace cst;
using namespace cst::train;

struct Data {
  data::SyntheticDataset ds;
  data::DatasetView train, val, test;
  explicit Data(std::uint64_t seed, std::size_t n_train = 40)
      : ds(data::generate_synthetic_dataset({n_train, 12, 20, 4, 16, 16, seed})),
        train(ds.train, {}),
        val(ds.val, {}),
        test(ds.test, {}) {}
};

TrainConfig tiny(std::size_t steps, data::SupervisionMode mode = data::SupervisionMode::kPixel) {
  TrainConfig c;
  c.model.out_channels = 8;
  c.steps = steps;
  c.val_interval = 2;
  c.val_episodes = 4;
  c.seed = 3;
  c.regime.mode = mode;
  c.enhancer.steps = 5;
  return c;
}

TEST(Trainer, EqualSeedsGiveIdenticalHistories) {
  Data d(1);
  auto a = train::train(tiny(4), d.train, &d.val);
  auto b = train::train(tiny(4), d.train, &d.val);
  ASSERT_EQ(a.history.size(), 4u);
  for (std::size_t i = 0; i < a.history.size(); ++i)
    EXPECT_EQ(a.history[i].to_json(), b.history[i].to_json());
  EXPECT_EQ(num::encode_checkpoint(a.best), num::encode_checkpoint(b.best));
}

TEST(Trainer, ImageRegimeNeverReadsGroundTruthMasks) {
  Data d(2);
  auto r = train::train(tiny(3, data::SupervisionMode::kImage), d.train, &d.val);
  EXPECT_EQ(r.ground_truth_reads, 0u);
  auto p = train::train(tiny(3), d.train, &d.val);
  EXPECT_GT(p.ground_truth_reads, 0u);
}

TEST(Trainer, MixedWithAllLabelsMatchesPixel) {
  Data d(3);
  auto mixed = tiny(4, data::SupervisionMode::kMixed);
  mixed.regime.pixel_fraction = 1.0;
  auto a = train::train(mixed, d.train, &d.val);
  auto b = train::train(tiny(4), d.train, &d.val);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    EXPECT_EQ(a.history[i].to_json(), b.history[i].to_json());
  EXPECT_TRUE(extract_enhancer(a.best));
  EXPECT_FALSE(extract_enhancer(b.best));
}

TEST(Trainer, MixedWithoutLabelledImagesRejected) {
  Data d(3);
  auto c = tiny(1, data::SupervisionMode::kMixed);
  c.regime.pixel_fraction = 0.0;
  try {
    train::train(c, d.train, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
  }
}

TEST(Trainer, BestMiouNeverDecreases) {
  Data d(4);
  auto c = tiny(6);
  c.val_interval = 1;
  auto r = train::train(c, d.train, &d.val);
  double last = -1;
  for (const auto& h : r.history) {
    ASSERT_TRUE(h.validated);
    EXPECT_GE(h.best_miou, last);
    EXPECT_GE(h.best_miou, h.val_miou);
    last = h.best_miou;
  }
}

TEST(Trainer, BackboneTokensStayFrozen) {
  Data d(5);
  std::vector<backbone::TokenBundle> before;
  for (std::size_t i = 0; i < d.train.size(); ++i) before.push_back(*d.train.tokens(i));
  auto r = train::train(tiny(3), d.train, nullptr);
  for (std::size_t i = 0; i < d.train.size(); ++i) EXPECT_EQ(*d.train.tokens(i), before[i]);
  for (const auto& [name, t] : r.final.entries())
    EXPECT_TRUE(name.rfind("transformer.", 0) == 0 || name.rfind("clf_head.", 0) == 0 ||
                name.rfind("seg_head.", 0) == 0)
        << name;
}

TEST(Trainer, FailingStepIsNamed) {
  Data d(6);
  auto m = d.ds.train;
  for (auto& rec : m.records) rec.tokens = "/nonexistent/tokens.cstk";
  data::DatasetView broken(m, {});
  try {
    train::train(tiny(2), broken, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingFailed);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(Trainer, InvalidConfigRejected) {
  Data d(6);
  auto c = tiny(2);
  c.lr = 0;
  EXPECT_THROW(train::train(c, d.train, nullptr), Error);
  c = tiny(2);
  c.model.pool_kernels = {5, 3};
  EXPECT_THROW(train::train(c, d.train, nullptr), Error);
}

TEST(Trainer, OverfitsFixedEpisodes) {
  Data d(7);
  auto c = tiny(200);
  c.model.out_channels = 16;
  c.episode_pool = 8;
  c.val_interval = 0;
  auto r = train::train(c, d.train, nullptr);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    first += r.history[i].loss_total;
    last += r.history[r.history.size() - 1 - i].loss_total;
  }
  EXPECT_LT(last, 0.25 * first);
}

// Predictor that reads the answer from ground truth.
objective::ShotResponse oracle(const ShotContext& ctx) {
  const auto lm = ctx.view.labels(ctx.episode.query);
  objective::ShotResponse r;
  r.height = lm->height;
  r.width = lm->width;
  const int cls = ctx.episode.classes[ctx.n];
  r.clf = ctx.episode.query_clf_gt[ctx.n] ? 1.0 : 0.0;
  for (int l : lm->labels) r.seg.push_back(l == cls ? 1.0 : 0.0);
  return r;
}

TEST(Evaluate, PerfectPredictorScoresFull) {
  Data d(8);
  SupervisionResolver res({data::SupervisionMode::kPixel, 0}, -0.1, nullptr, true);
  EvalConfig ec;
  ec.way = 2;
  ec.episodes = 30;
  auto r = evaluate(oracle, d.test, res, ec, 12, 12);
  EXPECT_DOUBLE_EQ(r.exact_ratio, 100.0);
  EXPECT_DOUBLE_EQ(r.miou, 100.0);
}

TEST(Evaluate, ReproducibleAcrossRunsAndWorkers) {
  Data d(9);
  auto params = init_model(tiny(1).model, d.test.backbone(), 1);
  SupervisionResolver res({data::SupervisionMode::kImage, 0}, -0.1, nullptr, true);
  EvalConfig ec;
  ec.way = 2;
  ec.episodes = 50;
  ec.seed = 4;
  auto a = evaluate(model_predictor(params, tiny(1).model), d.test, res, ec, 12, 12);
  auto b = evaluate(model_predictor(params, tiny(1).model), d.test, res, ec, 12, 12);
  ec.workers = 3;
  auto c = evaluate(model_predictor(params, tiny(1).model), d.test, res, ec, 12, 12);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.to_json(), c.to_json());
  EXPECT_EQ(a.episodes, 50u);
  EXPECT_EQ(res.ground_truth_reads(), 0u);
}

TEST(Evaluate, TestTimeMixedUsesEnhancer) {
  Data d(10);
  auto rec = d.ds.test;
  for (auto& r : rec.records) r.has_pixel_label = true;
  data::DatasetView flagged(rec, {});
  pseudo::EnhancerConfig ec;
  ec.steps = 2;
  auto enh = std::make_shared<const num::ParamStore>(
      pseudo::train_enhancer(enhancer_pairs(flagged), ec));
  SupervisionResolver res({data::SupervisionMode::kMixed, 1.0}, -0.1, enh, true);
  res.support_mask(flagged, 0, flagged.record(0).classes[0], 12, 12);
  EXPECT_EQ(res.ground_truth_reads(), 0u);
  SupervisionResolver training({data::SupervisionMode::kMixed, 1.0}, -0.1, enh, false);
  training.support_mask(flagged, 0, flagged.record(0).classes[0], 12, 12);
  EXPECT_EQ(training.ground_truth_reads(), 1u);
}

TEST(Evaluate, ZeroEpisodesRejected) {
  Data d(11);
  SupervisionResolver res({data::SupervisionMode::kPixel, 0}, -0.1, nullptr, true);
  EvalConfig ec;
  ec.episodes = 0;
  EXPECT_THROW(evaluate(oracle, d.test, res, ec, 12, 12), Error);
}

TEST(Resolver, PseudoSupportMaskMatchesGroundTruthForSalientClass) {
  Data d(12);
  data::DatasetView clean(d.ds.test, {}, {1.0, 0.0});
  SupervisionResolver pseudo({data::SupervisionMode::kImage, 0}, -0.1, nullptr);
  SupervisionResolver gt({data::SupervisionMode::kPixel, 0}, -0.1, nullptr);
  for (std::size_t i = 0; i < 5; ++i) {
    const int cls = backbone::LabeledGridImage::salient_class(clean.labels(i)->labels);
    EXPECT_EQ(pseudo.support_mask(clean, i, cls, 16, 16), gt.support_mask(clean, i, cls, 16, 16));
  }
}

}  // namespace
