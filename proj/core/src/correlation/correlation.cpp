#include "cst/correlation/correlation.hpp"

#include <Eigen/Dense>
#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"

namespace cst::corr {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void normalize_rows(RowMat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (n < num::ops::kNormEpsilon) {
      m.row(r).setZero();
    } else {
      m.row(r) /= n;
    }
  }
}

// Rows are tokens; columns gather the given heads' channels of one layer.
RowMat gather_tokens(const backbone::TokenBundle& b, std::size_t layer, std::size_t head_begin,
                     std::size_t head_count) {
  const std::size_t t = b.tokens(), c = b.head_dim;
  RowMat out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c * head_count));
  for (std::size_t h = 0; h < head_count; ++h) {
    auto blk = b.image_block(layer, head_begin + h);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t p = 0; p < t; ++p)
        out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(h * c + j)) = blk[j * t + p];
  }
  return out;
}

RowMat gather_class(const backbone::TokenBundle& b, std::size_t layer, std::size_t head_begin,
                    std::size_t head_count) {
  const std::size_t c = b.head_dim;
  RowMat out(1, static_cast<Eigen::Index>(c * head_count));
  for (std::size_t h = 0; h < head_count; ++h) {
    auto v = b.class_token(layer, head_begin + h);
    for (std::size_t j = 0; j < c; ++j) out(0, static_cast<Eigen::Index>(h * c + j)) = v[j];
  }
  return out;
}

}  // namespace

CorrelationVolume correlate(const backbone::TokenBundle& query,
                            const backbone::TokenBundle& support, bool use_multihead) {
  query.check_consistent();
  support.check_consistent();
  if (query.layers != support.layers || query.heads != support.heads ||
      query.head_dim != support.head_dim) {
    throw Error(ErrorCode::kShapeMismatch,
                "correlate: query (L=" + std::to_string(query.layers) +
                    ", M=" + std::to_string(query.heads) + ", C=" + std::to_string(query.head_dim) +
                    ") and support (L=" + std::to_string(support.layers) +
                    ", M=" + std::to_string(support.heads) +
                    ", C=" + std::to_string(support.head_dim) + ") differ");
  }
  CorrelationVolume vol;
  vol.t_q = query.tokens();
  vol.t_s = support.tokens();
  vol.layers = query.layers;
  vol.heads = use_multihead ? query.heads : 1;
  vol.query_h = query.grid_h;
  vol.query_w = query.grid_w;
  vol.support_h = support.grid_h;
  vol.support_w = support.grid_w;
  const std::size_t ch = vol.channels();
  vol.cls_corr.assign(vol.t_q * ch, 0.0);
  vol.img_corr.assign(vol.t_q * vol.t_s * ch, 0.0);

  const std::size_t span = use_multihead ? 1 : query.heads;
  RowMat img(static_cast<Eigen::Index>(vol.t_q), static_cast<Eigen::Index>(vol.t_s));
  for (std::size_t l = 0; l < vol.layers; ++l) {
    for (std::size_t m = 0; m < vol.heads; ++m) {
      const std::size_t c_idx = l * vol.heads + m;
      RowMat q = gather_tokens(query, l, m * span, span);
      RowMat s = gather_tokens(support, l, m * span, span);
      RowMat h = gather_class(support, l, m * span, span);
      normalize_rows(q);
      normalize_rows(s);
      normalize_rows(h);
      img.noalias() = q * s.transpose();
      Eigen::VectorXd cls = q * h.transpose();
      for (std::size_t i = 0; i < vol.t_q; ++i) {
        vol.cls_corr[i * ch + c_idx] = cls[static_cast<Eigen::Index>(i)];
        double* row = vol.img_corr.data() + i * vol.t_s * ch + c_idx;
        for (std::size_t j = 0; j < vol.t_s; ++j)
          row[j * ch] = img(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return vol;
}

num::Tensor assemble_z0(const CorrelationVolume& volume, std::size_t query_index) {
  if (query_index >= volume.t_q) {
    throw Error(ErrorCode::kIndexOutOfRange, "assemble_z0: query index " +
                                                 std::to_string(query_index) + " >= " +
                                                 std::to_string(volume.t_q));
  }
  const std::size_t ch = volume.channels();
  std::vector<double> z((1 + volume.t_s) * ch);
  std::copy_n(volume.cls_corr.begin() + static_cast<std::ptrdiff_t>(query_index * ch), ch,
              z.begin());
  std::copy_n(volume.img_corr.begin() + static_cast<std::ptrdiff_t>(query_index * volume.t_s * ch),
              volume.t_s * ch, z.begin() + static_cast<std::ptrdiff_t>(ch));
  return num::Tensor::from({1 + volume.t_s, ch}, std::move(z));
}

num::Tensor assemble_z0_batch(const CorrelationVolume& volume) {
  const std::size_t ch = volume.channels(), n = 1 + volume.t_s;
  std::vector<double> z(volume.t_q * n * ch);
  for (std::size_t i = 0; i < volume.t_q; ++i) {
    double* dst = z.data() + i * n * ch;
    std::copy_n(volume.cls_corr.data() + i * ch, ch, dst);
    std::copy_n(volume.img_corr.data() + i * volume.t_s * ch, volume.t_s * ch, dst + ch);
  }
  return num::Tensor::from({volume.t_q, n, ch}, std::move(z));
}

}  // namespace cst::corr
