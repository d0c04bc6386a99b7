#include <algorithm>
#include <cmath>
#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "ops_common.hpp"

namespace cst::num::ops {

using detail::Node;

namespace {

void require_chw(const char* op, const Tensor& x) {
  if (x.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": expected [C, H, W], got " + shape_str(x.shape()));
  }
}

// Source taps for one output coordinate under half-pixel sampling.
struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double l1 = src - static_cast<double>(i0);
    taps[o] = {i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_chw("conv2d", x);
  if (weight.rank() != 4 || weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3) ||
      (weight.dim(2) != 1 && weight.dim(2) != 3)) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d: weight " + shape_str(weight.shape()) +
                                               " incompatible with input " +
                                               shape_str(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{weight.dim(0)}) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                    shape_str(weight.shape()));
  }
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(0), ks = weight.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(ks / 2);
  const std::size_t hw = h * w, patch = cin * ks * ks;

  // im2col: rows index (cin, ky, kx), columns index output pixels.
  std::vector<double> cols(patch * hw, 0.0);
  auto xv = x.values();
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t ky = 0; ky < ks; ++ky)
      for (std::size_t kx = 0; kx < ks; ++kx) {
        double* row = cols.data() + ((ci * ks + ky) * ks + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            row[y * w + xx] = xv[(ci * h + static_cast<std::size_t>(sy)) * w +
                                 static_cast<std::size_t>(sx)];
          }
        }
      }

  const auto ecout = static_cast<Eigen::Index>(cout), epatch = static_cast<Eigen::Index>(patch),
             ehw = static_cast<Eigen::Index>(hw);
  std::vector<double> out(cout * hw);
  eig::Map y(out.data(), ecout, ehw);
  y.noalias() = eig::CMap(weight.values().data(), ecout, epatch) * eig::CMap(cols.data(), epatch, ehw);
  if (has_bias) {
    y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.values().data(), ecout);
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      "conv2d", {cout, h, w}, std::move(out), std::move(inputs),
      [cin, h, w, cout, ks, pad, hw, patch, has_bias, cols = std::move(cols)](Node& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        const auto ecout = static_cast<Eigen::Index>(cout),
                   epatch = static_cast<Eigen::Index>(patch), ehw = static_cast<Eigen::Index>(hw);
        eig::CMap dy(self.grad.data(), ecout, ehw);
        if (pw->requires_grad) {
          eig::Map(pw->grad.data(), ecout, epatch).noalias() +=
              dy * eig::CMap(cols.data(), epatch, ehw).transpose();
        }
        if (has_bias && self.parents[2]->requires_grad) {
          Eigen::Map<Eigen::VectorXd>(self.parents[2]->grad.data(), ecout) += dy.rowwise().sum();
        }
        if (!px->requires_grad) return;
        eig::RowMat dcols = eig::CMap(pw->value.data(), ecout, epatch).transpose() * dy;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < ks; ++ky)
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const double* row =
                  dcols.data() + static_cast<std::ptrdiff_t>(((ci * ks + ky) * ks + kx) * hw);
              for (std::size_t yy = 0; yy < h; ++yy) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy + ky) - pad;
                if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t xx = 0; xx < w; ++xx) {
                  const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
                  if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                  px->grad[(ci * h + static_cast<std::size_t>(sy)) * w +
                           static_cast<std::size_t>(sx)] += row[yy * w + xx];
                }
              }
            }
      });
}

Tensor avg_pool2d(const Tensor& x, std::size_t k) {
  require_chw("avg_pool2d", x);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (k == 0 || h % k != 0 || w % k != 0) {
    throw Error(ErrorCode::kShapeMismatch, "avg_pool2d: kernel " + std::to_string(k) +
                                               " does not tile " + std::to_string(h) + "x" +
                                               std::to_string(w));
  }
  const std::size_t oh = h / k, ow = w / k;
  const double inv = 1.0 / static_cast<double>(k * k);
  auto xv = x.values();
  std::vector<double> out(c * oh * ow, 0.0);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(ci * oh + y / k) * ow + xx / k] += xv[(ci * h + y) * w + xx] * inv;
  return make_result("avg_pool2d", {c, oh, ow}, std::move(out), {x},
                     [c, h, w, k, oh, ow, inv](Node& self) {
                       auto& p = self.parents[0];
                       for (std::size_t ci = 0; ci < c; ++ci)
                         for (std::size_t y = 0; y < h; ++y)
                           for (std::size_t xx = 0; xx < w; ++xx)
                             p->grad[(ci * h + y) * w + xx] +=
                                 self.grad[(ci * oh + y / k) * ow + xx / k] * inv;
                     });
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_chw("bilinear_resize", x);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h == 0 || out_w == 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::kShapeMismatch, "bilinear_resize: extents must be positive");
  }
  if (out_h == h && out_w == w) return reshape(x, x.shape());
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  auto xv = x.values();
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* src = xv.data() + ci * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        out[(ci * out_h + oy) * out_w + ox] =
            a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
            a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]);
      }
    }
  }
  return make_result("bilinear_resize", {c, out_h, out_w}, std::move(out), {x},
                     [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node& self) {
                       auto& p = self.parents[0];
                       for (std::size_t ci = 0; ci < c; ++ci) {
                         double* dst = p->grad.data() + ci * h * w;
                         for (std::size_t oy = 0; oy < out_h; ++oy) {
                           const Tap& a = ty[oy];
                           for (std::size_t ox = 0; ox < out_w; ++ox) {
                             const Tap& b = tx[ox];
                             const double g = self.grad[(ci * out_h + oy) * out_w + ox];
                             dst[a.i0 * w + b.i0] += g * a.w0 * b.w0;
                             dst[a.i0 * w + b.i1] += g * a.w0 * b.w1;
                             dst[a.i1 * w + b.i0] += g * a.w1 * b.w0;
                             dst[a.i1 * w + b.i1] += g * a.w1 * b.w1;
                           }
                         }
                       }
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_chw("global_avg_pool", x);
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (hw == 0) throw Error(ErrorCode::kShapeMismatch, "global_avg_pool: empty spatial extent");
  auto xv = x.values();
  std::vector<double> out(c, 0.0);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t j = 0; j < hw; ++j) out[ci] += xv[ci * hw + j];
    out[ci] /= static_cast<double>(hw);
  }
  return make_result("global_avg_pool", {c}, std::move(out), {x}, [c, hw](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t j = 0; j < hw; ++j)
        p->grad[ci * hw + j] += self.grad[ci] / static_cast<double>(hw);
  });
}

Tensor pool_support_tokens(const Tensor& x, std::size_t grid_h, std::size_t grid_w,
                           std::size_t k) {
  if (x.rank() != 3 || x.dim(1) != 1 + grid_h * grid_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "pool_support_tokens: input " + shape_str(x.shape()) + " does not hold 1 + " +
                    std::to_string(grid_h) + "x" + std::to_string(grid_w) + " tokens");
  }
  if (k == 0 || grid_h % k != 0 || grid_w % k != 0) {
    throw Error(ErrorCode::kShapeMismatch, "pool_support_tokens: kernel " + std::to_string(k) +
                                               " does not tile " + std::to_string(grid_h) +
                                               "x" + std::to_string(grid_w));
  }
  const std::size_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
  const std::size_t ow = grid_w / k, on = 1 + (grid_h / k) * ow;
  const double inv = 1.0 / static_cast<double>(k * k);
  auto xv = x.values();
  std::vector<double> out(b * on * c, 0.0);
  for (std::size_t bi = 0; bi < b; ++bi) {
    const double* src = xv.data() + bi * n * c;
    double* dst = out.data() + bi * on * c;
    std::copy(src, src + c, dst);
    for (std::size_t y = 0; y < grid_h; ++y)
      for (std::size_t xx = 0; xx < grid_w; ++xx) {
        const double* s = src + (1 + y * grid_w + xx) * c;
        double* d = dst + (1 + (y / k) * ow + xx / k) * c;
        for (std::size_t j = 0; j < c; ++j) d[j] += s[j] * inv;
      }
  }
  return make_result("pool_support_tokens", {b, on, c}, std::move(out), {x},
                     [b, n, c, on, ow, grid_h, grid_w, k, inv](Node& self) {
                       auto& p = self.parents[0];
                       for (std::size_t bi = 0; bi < b; ++bi) {
                         double* dx = p->grad.data() + bi * n * c;
                         const double* g = self.grad.data() + bi * on * c;
                         for (std::size_t j = 0; j < c; ++j) dx[j] += g[j];
                         for (std::size_t y = 0; y < grid_h; ++y)
                           for (std::size_t xx = 0; xx < grid_w; ++xx) {
                             double* d = dx + (1 + y * grid_w + xx) * c;
                             const double* s = g + (1 + (y / k) * ow + xx / k) * c;
                             for (std::size_t j = 0; j < c; ++j) d[j] += s[j] * inv;
                           }
                       }
                     });
}

}  // namespace cst::num::ops
