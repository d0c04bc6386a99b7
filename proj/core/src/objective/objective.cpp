#include "cst/objective/objective.hpp"

#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"

namespace cst::objective {

namespace ops = num::ops;

LossReport compute_loss(const model::PredictionPair& pred, bool y_gt, const MaskMap& mask_gt,
                        double lambda) {
  const auto& seg = pred.seg_prob;
  if (seg.rank() != 2 || seg.dim(0) != mask_gt.height || seg.dim(1) != mask_gt.width) {
    throw Error(ErrorCode::kShapeMismatch,
                "compute_loss: prediction " + num::shape_str(seg.shape()) + " vs mask " +
                    std::to_string(mask_gt.height) + "x" + std::to_string(mask_gt.width));
  }
  if (pred.clf_prob.numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "compute_loss: clf_prob must be a scalar");
  }
  const double target = y_gt ? 1.0 : 0.0;
  auto clf = ops::binary_cross_entropy(pred.clf_prob, std::span<const double>(&target, 1));
  auto seg_loss = ops::binary_cross_entropy(seg, mask_gt.values);
  LossReport r;
  r.total = ops::add(ops::scale(clf, lambda), seg_loss);
  r.loss_clf = clf.item();
  r.loss_seg = seg_loss.item();
  r.loss_total = r.total.item();
  r.lambda = lambda;
  return r;
}

EpisodePrediction predict_episode(const std::vector<std::vector<ShotResponse>>& responses,
                                  double delta) {
  if (responses.empty() || responses.front().empty()) {
    throw Error(ErrorCode::kInvalidArgument, "predict_episode: empty prediction set");
  }
  const std::size_t n_way = responses.size(), k_shot = responses.front().size();
  const std::size_t h = responses.front().front().height, w = responses.front().front().width;
  EpisodePrediction out;
  out.way = n_way;
  out.height = h;
  out.width = w;
  out.clf_response.assign(n_way, 0.0);
  out.seg_response.assign(n_way, std::vector<double>(h * w, 0.0));
  for (std::size_t n = 0; n < n_way; ++n) {
    if (responses[n].size() != k_shot) {
      throw Error(ErrorCode::kShapeMismatch, "predict_episode: ragged shot counts");
    }
    for (const auto& r : responses[n]) {
      if (r.height != h || r.width != w || r.seg.size() != h * w) {
        throw Error(ErrorCode::kShapeMismatch, "predict_episode: response maps differ in size");
      }
      out.clf_response[n] += r.clf;
      for (std::size_t p = 0; p < h * w; ++p) out.seg_response[n][p] += r.seg[p];
    }
    out.clf_response[n] /= static_cast<double>(k_shot);
    for (double& v : out.seg_response[n]) v /= static_cast<double>(k_shot);
    out.clf_decision.push_back(out.clf_response[n] > delta ? 1 : 0);
  }
  out.seg_labels.assign(h * w, static_cast<int>(n_way) + 1);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < n_way; ++n)
      if (out.seg_response[n][p] > out.seg_response[best][p]) best = n;
    if (out.seg_response[best][p] > delta) out.seg_labels[p] = static_cast<int>(best) + 1;
  }
  return out;
}

}  // namespace cst::objective
