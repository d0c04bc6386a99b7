#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cst/numerics/tensor.hpp"

// Differentiable kernel set. Layouts are fixed per kernel and documented on
// each declaration; there is no general broadcasting.
namespace cst::num::ops {

inline constexpr double kNormEpsilon = 1e-12;

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);

// ---- reductions and reshapes -----------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
// [R, C] -> [C, R]
Tensor transpose2d(const Tensor& x);
// Picks index `i` along axis 0: [A, ...] -> [...].
Tensor select0(const Tensor& x, std::size_t i);
// Picks row `row` of every batch element: [B, N, C] -> [B, C].
Tensor select_row(const Tensor& x, std::size_t row);

// ---- linear algebra --------------------------------------------------------

// [n, k] x [k, m] -> [n, m]
Tensor matmul(const Tensor& a, const Tensor& b);
// x: [..., in], weight: [in, out], bias: [out] (may be undefined) -> [..., out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---- normalisation and activations over an axis ----------------------------

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
// Normalises each vector along the last axis; vectors with norm below
// kNormEpsilon map to zero.
Tensor l2_normalize(const Tensor& x);
// x: [B, S, C] channels-last; statistics per (batch, group) over S x C/groups.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::size_t groups, double eps = kNormEpsilon);

// ---- spatial kernels on [C, H, W] ------------------------------------------

// weight: [out, in, k, k], k in {1, 3}; zero padding k/2 keeps H and W.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Non-overlapping k x k average pooling; H and W must be multiples of k.
Tensor avg_pool2d(const Tensor& x, std::size_t k);
// Half-pixel bilinear resampling (align_corners = false). Equal extents copy.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);
// [C, H, W] -> [C]
Tensor global_avg_pool(const Tensor& x);

// ---- correlation transformer helpers ---------------------------------------

// x: [B, 1 + h*w, C]. Row 0 passes through; rows 1.. are viewed as an h x w
// grid and average-pooled with a k x k window. -> [B, 1 + (h/k)(w/k), C]
Tensor pool_support_tokens(const Tensor& x, std::size_t grid_h, std::size_t grid_w,
                           std::size_t k);

// Multi-head scaled dot-product attention with per-key masking.
// q: [B, Nq, C], k and v: [B, Nk, C]; C split evenly across `heads`.
// key_mask (size Nk, or empty for none): 0 marks a key that receives the
// additive kMaskedLogit on every logit. When `probs_out` is non-null it
// receives the attention weights laid out as [B, heads, Nq, Nk].
inline constexpr double kMaskedLogit = -1e9;
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::size_t heads, std::span<const std::uint8_t> key_mask,
                        std::vector<double>* probs_out = nullptr);

// ---- losses ----------------------------------------------------------------

// Mean two-way cross-entropy of probabilities `p` against binary targets.
// Probabilities are clamped to [eps, 1 - eps] inside the logarithm.
inline constexpr double kProbEpsilon = 1e-12;
Tensor binary_cross_entropy(const Tensor& p, std::span<const double> targets);

}  // namespace cst::num::ops
