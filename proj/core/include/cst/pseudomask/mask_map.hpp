#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cst {

// 2-D map with explicit extents; binary maps hold only 0 and 1.
struct MaskMap {
  enum class Kind { kBinary, kContinuous };

  std::size_t height = 0, width = 0;
  std::vector<double> values;
  Kind kind = Kind::kBinary;

  static MaskMap zeros(std::size_t h, std::size_t w, Kind kind = Kind::kBinary) {
    return {h, w, std::vector<double>(h * w, 0.0), kind};
  }
  static MaskMap binary_from(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& bits);

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t size() const { return height * width; }
  std::size_t foreground() const;
  // Throws kShapeMismatch / kInvalidArgument if extents or codomain are off.
  void validate() const;

  // Resamples onto an h x w grid (half-pixel bilinear) and, for binary maps,
  // keeps a cell as foreground when any foreground reaches it (value > 0).
  MaskMap resized(std::size_t h, std::size_t w) const;

  bool operator==(const MaskMap&) const = default;
};

}  // namespace cst
