#include "cst/pseudomask/mask_map.hpp"

#include <string>

#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"

namespace cst {

MaskMap MaskMap::binary_from(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& bits) {
  if (bits.size() != h * w) {
    throw Error(ErrorCode::kShapeMismatch, "mask: " + std::to_string(bits.size()) +
                                               " values for " + std::to_string(h) + "x" +
                                               std::to_string(w));
  }
  MaskMap m = zeros(h, w);
  for (std::size_t i = 0; i < bits.size(); ++i) m.values[i] = bits[i] ? 1.0 : 0.0;
  return m;
}

std::size_t MaskMap::foreground() const {
  std::size_t n = 0;
  for (double v : values) n += v > 0.5;
  return n;
}

void MaskMap::validate() const {
  if (height == 0 || width == 0 || values.size() != height * width) {
    throw Error(ErrorCode::kShapeMismatch, "mask: " + std::to_string(values.size()) +
                                               " values for " + std::to_string(height) + "x" +
                                               std::to_string(width));
  }
  if (kind == Kind::kBinary) {
    for (double v : values) {
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "mask: binary map holds " + std::to_string(v));
      }
    }
  }
}

MaskMap MaskMap::resized(std::size_t h, std::size_t w) const {
  validate();
  if (h == height && w == width) return *this;
  num::NoGradGuard no_grad;
  auto r = num::ops::bilinear_resize(num::Tensor::from({1, height, width}, values), h, w);
  MaskMap out{h, w, {r.values().begin(), r.values().end()}, kind};
  if (kind == Kind::kBinary)
    for (double& v : out.values) v = v > 0.0 ? 1.0 : 0.0;
  return out;
}

}  // namespace cst
