#include <cmath>
#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "ops_common.hpp"

namespace cst::num::ops {

using detail::Node;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "matmul: cannot multiply " + shape_str(a.shape()) +
                                               " by " + shape_str(b.shape()));
  }
  const auto n = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto m = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(n * m));
  eig::Map(out.data(), n, m).noalias() =
      eig::CMap(a.values().data(), n, k) * eig::CMap(b.values().data(), k, m);
  return make_result("matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b},
                     [n, k, m](Node& self) {
                       auto& pa = self.parents[0];
                       auto& pb = self.parents[1];
                       eig::CMap dy(self.grad.data(), n, m);
                       if (pa->requires_grad) {
                         eig::Map(pa->grad.data(), n, k).noalias() +=
                             dy * eig::CMap(pb->value.data(), k, m).transpose();
                       }
                       if (pb->requires_grad) {
                         eig::Map(pb->grad.data(), k, m).noalias() +=
                             eig::CMap(pa->value.data(), n, k).transpose() * dy;
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.dim(x.rank() - 1) != weight.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "linear: input " + shape_str(x.shape()) +
                                               " incompatible with weight " +
                                               shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{weight.dim(1)}) {
    throw Error(ErrorCode::kShapeMismatch, "linear: bias " + shape_str(bias.shape()) +
                                               " does not match weight " +
                                               shape_str(weight.shape()));
  }
  const auto in = static_cast<Eigen::Index>(weight.dim(0));
  const auto outc = static_cast<Eigen::Index>(weight.dim(1));
  const auto rows = static_cast<Eigen::Index>(x.numel() / weight.dim(0));
  Shape shape = x.shape();
  shape.back() = weight.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows * outc));
  eig::Map y(out.data(), rows, outc);
  y.noalias() = eig::CMap(x.values().data(), rows, in) *
                eig::CMap(weight.values().data(), in, outc);
  if (has_bias) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), outc);
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result("linear", std::move(shape), std::move(out), std::move(inputs),
                     [rows, in, outc, has_bias](Node& self) {
                       auto& px = self.parents[0];
                       auto& pw = self.parents[1];
                       eig::CMap dy(self.grad.data(), rows, outc);
                       if (px->requires_grad) {
                         eig::Map(px->grad.data(), rows, in).noalias() +=
                             dy * eig::CMap(pw->value.data(), in, outc).transpose();
                       }
                       if (pw->requires_grad) {
                         eig::Map(pw->grad.data(), in, outc).noalias() +=
                             eig::CMap(px->value.data(), rows, in).transpose() * dy;
                       }
                       if (has_bias && self.parents[2]->requires_grad) {
                         Eigen::Map<Eigen::RowVectorXd>(self.parents[2]->grad.data(), outc) +=
                             dy.colwise().sum();
                       }
                     });
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::size_t heads, std::span<const std::uint8_t> key_mask,
                        std::vector<double>* probs_out) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3 || k.shape() != v.shape() ||
      q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch, "masked_attention: q " + shape_str(q.shape()) +
                                               ", k " + shape_str(k.shape()) + ", v " +
                                               shape_str(v.shape()) + " are inconsistent");
  }
  const std::size_t b = q.dim(0), nq = q.dim(1), nk = k.dim(1), c = q.dim(2);
  if (heads == 0 || c % heads != 0) {
    throw Error(ErrorCode::kShapeMismatch, "masked_attention: " + std::to_string(c) +
                                               " channels not divisible by " +
                                               std::to_string(heads) + " heads");
  }
  if (!key_mask.empty() && key_mask.size() != nk) {
    throw Error(ErrorCode::kShapeMismatch, "masked_attention: mask has " +
                                               std::to_string(key_mask.size()) +
                                               " entries for " + std::to_string(nk) + " keys");
  }
  const std::size_t dh = c / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto eq = static_cast<Eigen::Index>(nq), ek = static_cast<Eigen::Index>(nk),
             ed = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(c));

  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(ek);
  std::vector<Eigen::Index> masked;
  for (std::size_t j = 0; j < key_mask.size(); ++j) {
    if (!key_mask[j]) {
      bias[static_cast<Eigen::Index>(j)] = kMaskedLogit;
      masked.push_back(static_cast<Eigen::Index>(j));
    }
  }
  // Vectorised exp can leave denormals where the true value underflows to 0;
  // masked keys are pinned to exactly zero weight whenever any key is open.
  const bool pin_masked = !masked.empty() && masked.size() < nk;

  std::vector<double> probs(b * heads * nq * nk);
  std::vector<double> out(b * nq * c);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t h = 0; h < heads; ++h) {
      eig::CStridedMap qh(q.values().data() + bi * nq * c + h * dh, eq, ed, stride);
      eig::CStridedMap kh(k.values().data() + bi * nk * c + h * dh, ek, ed, stride);
      eig::CStridedMap vh(v.values().data() + bi * nk * c + h * dh, ek, ed, stride);
      eig::Map a(probs.data() + (bi * heads + h) * nq * nk, eq, ek);
      a.noalias() = qh * kh.transpose();
      a *= inv_sqrt;
      a.rowwise() += bias;
      for (Eigen::Index r = 0; r < eq; ++r) {
        auto row = a.row(r);
        const double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        if (pin_masked)
          for (Eigen::Index j : masked) row[j] = 0.0;
        row /= row.sum();
      }
      eig::StridedMap oh(out.data() + bi * nq * c + h * dh, eq, ed, stride);
      oh.noalias() = a * vh;
    }
  }
  if (probs_out) *probs_out = probs;
  return make_result(
      "masked_attention", {b, nq, c}, std::move(out), {q, k, v},
      [b, nq, nk, c, heads, dh, inv_sqrt, probs = std::move(probs)](Node& self) {
        auto& pq = self.parents[0];
        auto& pk = self.parents[1];
        auto& pv = self.parents[2];
        const auto eq = static_cast<Eigen::Index>(nq), ek = static_cast<Eigen::Index>(nk),
                   ed = static_cast<Eigen::Index>(dh);
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(c));
        eig::RowMat da(eq, ek);
        for (std::size_t bi = 0; bi < b; ++bi) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t qoff = bi * nq * c + h * dh;
            const std::size_t koff = bi * nk * c + h * dh;
            eig::CMap a(probs.data() + (bi * heads + h) * nq * nk, eq, ek);
            eig::CStridedMap dout(self.grad.data() + qoff, eq, ed, stride);
            eig::CStridedMap vh(pv->value.data() + koff, ek, ed, stride);
            if (pv->requires_grad) {
              eig::StridedMap(pv->grad.data() + koff, ek, ed, stride).noalias() +=
                  a.transpose() * dout;
            }
            if (!pq->requires_grad && !pk->requires_grad) continue;
            da.noalias() = dout * vh.transpose();
            // Softmax backward: ds = a * (da - rowsum(da * a)).
            Eigen::VectorXd dots = (da.array() * a.array()).rowwise().sum();
            da = (a.array() * (da.array().colwise() - dots.array())).matrix();
            da *= inv_sqrt;
            if (pq->requires_grad) {
              eig::CStridedMap kh(pk->value.data() + koff, ek, ed, stride);
              eig::StridedMap(pq->grad.data() + qoff, eq, ed, stride).noalias() += da * kh;
            }
            if (pk->requires_grad) {
              eig::CStridedMap qh(pq->value.data() + qoff, eq, ed, stride);
              eig::StridedMap(pk->grad.data() + koff, ek, ed, stride).noalias() +=
                  da.transpose() * qh;
            }
          }
        }
      });
}

}  // namespace cst::num::ops
