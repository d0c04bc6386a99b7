#include <cmath>
#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"
#include "ops_common.hpp"

namespace cst::num::ops {

using detail::Node;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": shapes " +
                                               shape_str(a.shape()) + " and " +
                                               shape_str(b.shape()) + " differ");
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i] * pb->value[i];
      if (pb->requires_grad) pb->grad[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return make_result("scale", x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (p->value[i] > 0.0) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Split by sign so exp never overflows.
    const double v = xv[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return make_result("sigmoid", x.shape(), std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      p->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(xv[i]);
  return make_result("log", x.shape(), std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] / p->value[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result("sum", {}, {s}, {x}, [](Node& self) {
    auto& p = self.parents[0];
    for (double& g : p->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw Error(ErrorCode::kShapeMismatch, "mean: empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double n = static_cast<double>(x.numel());
  return make_result("mean", {}, {s / n}, {x}, [n](Node& self) {
    auto& p = self.parents[0];
    for (double& g : p->grad) g += self.grad[0] / n;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape: cannot view " + shape_str(x.shape()) +
                                               " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                "transpose2d: expected rank 2, got " + shape_str(x.shape()));
  }
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  return make_result("transpose2d", {c, r}, std::move(out), {x}, [r, c](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor select0(const Tensor& x, std::size_t i) {
  if (x.rank() < 1 || i >= x.dim(0)) {
    throw Error(ErrorCode::kIndexOutOfRange, "select0: index " + std::to_string(i) +
                                                 " out of range for " + shape_str(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t stride = shape_numel(shape);
  auto xv = x.values();
  std::vector<double> out(xv.begin() + i * stride, xv.begin() + (i + 1) * stride);
  return make_result("select0", std::move(shape), std::move(out), {x},
                     [i, stride](Node& self) {
                       auto& p = self.parents[0];
                       for (std::size_t j = 0; j < stride; ++j) p->grad[i * stride + j] += self.grad[j];
                     });
}

Tensor select_row(const Tensor& x, std::size_t row) {
  if (x.rank() != 3 || row >= x.dim(1)) {
    throw Error(ErrorCode::kIndexOutOfRange, "select_row: row " + std::to_string(row) +
                                                 " invalid for " + shape_str(x.shape()));
  }
  const std::size_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
  std::vector<double> out(b * c);
  auto xv = x.values();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[(i * n + row) * c + j];
  return make_result("select_row", {b, c}, std::move(out), {x}, [b, n, c, row](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < c; ++j) p->grad[(i * n + row) * c + j] += self.grad[i * c + j];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw Error(ErrorCode::kShapeMismatch, "softmax: axis " + std::to_string(axis) +
                                               " invalid for " + shape_str(x.shape()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return make_result("softmax", s, std::move(out), {x}, [outer, inner, n](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          dot += self.grad[base + j * inner] * self.value[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          p->grad[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor l2_normalize(const Tensor& x) {
  if (x.rank() < 1 || x.dim(x.rank() - 1) == 0) {
    throw Error(ErrorCode::kShapeMismatch, "l2_normalize: empty last axis");
  }
  const std::size_t d = x.dim(x.rank() - 1);
  const std::size_t rows = x.numel() / d;
  auto xv = x.values();
  std::vector<double> out(x.numel(), 0.0);
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += xv[r * d + j] * xv[r * d + j];
    const double nrm = std::sqrt(ss);
    norms[r] = nrm;
    if (nrm < kNormEpsilon) continue;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xv[r * d + j] / nrm;
  }
  return make_result("l2_normalize", x.shape(), std::move(out), {x},
                     [d, rows, norms = std::move(norms)](Node& self) {
                       auto& p = self.parents[0];
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (norms[r] < kNormEpsilon) continue;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j)
                           dot += self.value[r * d + j] * self.grad[r * d + j];
                         for (std::size_t j = 0; j < d; ++j) {
                           p->grad[r * d + j] +=
                               (self.grad[r * d + j] - self.value[r * d + j] * dot) / norms[r];
                         }
                       }
                     });
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::size_t groups, double eps) {
  if (x.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "group_norm: expected [B, S, C], got " + shape_str(x.shape()));
  }
  const std::size_t b = x.dim(0), s = x.dim(1), c = x.dim(2);
  if (groups == 0 || c % groups != 0) {
    throw Error(ErrorCode::kShapeMismatch, "group_norm: " + std::to_string(c) +
                                               " channels not divisible by " +
                                               std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw Error(ErrorCode::kShapeMismatch, "group_norm: affine parameters must be [" +
                                               std::to_string(c) + "], got " +
                                               shape_str(gamma.shape()) + " and " +
                                               shape_str(beta.shape()));
  }
  const std::size_t cg = c / groups;
  const double count = static_cast<double>(s * cg);
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(b * groups);
  std::vector<double> out(x.numel());
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t g = 0; g < groups; ++g) {
      // Mean taken relative to the group's first element so constant groups
      // centre to exactly zero.
      const double pivot = xv[bi * s * c + g * cg];
      double m = 0.0;
      for (std::size_t si = 0; si < s; ++si)
        for (std::size_t j = g * cg; j < (g + 1) * cg; ++j) m += xv[(bi * s + si) * c + j] - pivot;
      m = pivot + m / count;
      double var = 0.0;
      for (std::size_t si = 0; si < s; ++si)
        for (std::size_t j = g * cg; j < (g + 1) * cg; ++j) {
          const double dlt = xv[(bi * s + si) * c + j] - m;
          var += dlt * dlt;
        }
      var /= count;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[bi * groups + g] = is;
      for (std::size_t si = 0; si < s; ++si)
        for (std::size_t j = g * cg; j < (g + 1) * cg; ++j) {
          const std::size_t idx = (bi * s + si) * c + j;
          xhat[idx] = (xv[idx] - m) * is;
          out[idx] = xhat[idx] * gv[j] + bv[j];
        }
    }
  }
  return make_result(
      "group_norm", x.shape(), std::move(out), {x, gamma, beta},
      [b, s, c, groups, cg, count, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const auto& gv = pg->value;
        for (std::size_t bi = 0; bi < b; ++bi) {
          for (std::size_t g = 0; g < groups; ++g) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t si = 0; si < s; ++si)
              for (std::size_t j = g * cg; j < (g + 1) * cg; ++j) {
                const std::size_t idx = (bi * s + si) * c + j;
                const double dxh = self.grad[idx] * gv[j];
                sum_d += dxh;
                sum_dx += dxh * xhat[idx];
                if (pg->requires_grad) pg->grad[j] += self.grad[idx] * xhat[idx];
                if (pb->requires_grad) pb->grad[j] += self.grad[idx];
              }
            if (!px->requires_grad) continue;
            const double is = inv_std[bi * groups + g];
            for (std::size_t si = 0; si < s; ++si)
              for (std::size_t j = g * cg; j < (g + 1) * cg; ++j) {
                const std::size_t idx = (bi * s + si) * c + j;
                const double dxh = self.grad[idx] * gv[j];
                px->grad[idx] += is / count * (count * dxh - sum_d - xhat[idx] * sum_dx);
              }
          }
        }
      });
}

Tensor binary_cross_entropy(const Tensor& p, std::span<const double> targets) {
  if (targets.size() != p.numel() || p.numel() == 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "binary_cross_entropy: " + std::to_string(p.numel()) +
                    " predictions vs " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = p.numel();
  auto pv = p.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = targets[i];
    total -= t * std::log(std::max(pv[i], kProbEpsilon)) +
             (1.0 - t) * std::log(std::max(1.0 - pv[i], kProbEpsilon));
  }
  std::vector<double> tg(targets.begin(), targets.end());
  return make_result("binary_cross_entropy", {}, {total / static_cast<double>(n)}, {p},
                     [n, tg = std::move(tg)](Node& self) {
                       auto& pp = self.parents[0];
                       const double g = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double pi = pp->value[i];
                         double d = 0.0;
                         if (pi > kProbEpsilon) d -= tg[i] / pi;
                         if (1.0 - pi > kProbEpsilon) d += (1.0 - tg[i]) / (1.0 - pi);
                         pp->grad[i] += g * d;
                       }
                     });
}

}  // namespace cst::num::ops
