#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cst::backbone {

// Shape of a frozen ViT's outputs. The reference ViT-S/8 setting is
// layers=12, heads=6, head_dim=64 on a 50x50 token grid.
struct BackboneConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t head_dim = 8;
  std::size_t grid_h = 16;
  std::size_t grid_w = 16;

  std::size_t tokens() const { return grid_h * grid_w; }
  void validate() const;
  static BackboneConfig reference() { return {12, 6, 64, 50, 50}; }
};

// Frozen-backbone outputs for one image, stored as 32-bit floats exactly as
// they appear on disk.
//   image_tokens: [layer][head][head_dim][T]   (channel-major C x T blocks)
//   class_tokens: [layer][head][head_dim]
//   last_q/last_k: [head][1 + T][head_dim]     (row 0 is the class token)
struct TokenBundle {
  std::size_t layers = 0, heads = 0, head_dim = 0, grid_h = 0, grid_w = 0;
  std::vector<float> image_tokens;
  std::vector<float> class_tokens;
  std::vector<float> last_q;
  std::vector<float> last_k;

  std::size_t tokens() const { return grid_h * grid_w; }
  BackboneConfig config() const { return {layers, heads, head_dim, grid_h, grid_w}; }

  std::span<const float> image_block(std::size_t layer, std::size_t head) const;
  std::span<const float> class_token(std::size_t layer, std::size_t head) const;
  std::span<const float> query_rows(std::size_t head) const;
  std::span<const float> key_rows(std::size_t head) const;

  // Allocates zeroed storage for the given extents.
  static TokenBundle allocate(const BackboneConfig& cfg);
  // Throws kShapeMismatch unless every buffer matches the recorded extents.
  void check_consistent() const;

  bool operator==(const TokenBundle&) const = default;
};

// A small image as a grid of class ids (0 = background). `designated_class`
// is the object the synthetic backbone treats as salient: its class token
// summarises that object and its attention lights up on it.
struct LabeledGridImage {
  std::size_t height = 0, width = 0;
  std::vector<int> labels;
  int designated_class = 0;

  int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  // Class with the largest area, ties to the lowest id; 0 when all background.
  static int salient_class(const std::vector<int>& labels);
};

struct SyntheticSignal {
  double strength = 1.0;  // s
  double noise = 0.05;    // sigma
};

// Deterministic stand-in for a frozen self-supervised ViT. Image tokens are
// one-hot class embeddings (scaled by s) plus seeded Gaussian noise; the last
// layer's keys carry a +/- salience component along the final channel and the
// class-token query points along it, so key/class-query cosines are +-1/sqrt(2)
// before noise. Requires head_dim >= max class id + 2.
TokenBundle synthetic_tokens(const LabeledGridImage& image, const BackboneConfig& cfg,
                             std::uint64_t seed, const SyntheticSignal& signal = {});

// Bilinearly resamples every image-token map (and the image rows of the
// last-layer q/k) to target extents. Class tokens are untouched.
TokenBundle resize_support_grid(const TokenBundle& bundle, std::size_t target_h,
                                std::size_t target_w);

// Token file: "CSTK", u32 version, u32 L, M, C, grid_h, grid_w, then image
// tokens, class tokens, last_q, last_k as f32, all little-endian.
inline constexpr std::uint32_t kTokenFileVersion = 1;
std::vector<char> encode_tokens(const TokenBundle& bundle);
TokenBundle decode_tokens(const std::vector<char>& bytes, const std::string& what);
void save_tokens(const TokenBundle& bundle, const std::string& path);
TokenBundle load_tokens(const std::string& path);

}  // namespace cst::backbone
