#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cst/backbone/tokens.hpp"
#include "cst/error.hpp"

namespace {

using namespace cst::backbone;

LabeledGridImage two_rect_image() {
  LabeledGridImage img{16, 16, std::vector<int>(256, 0), 0};
  for (int y = 2; y < 9; ++y)
    for (int x = 3; x < 12; ++x) img.labels[y * 16 + x] = 2;
  for (int y = 10; y < 14; ++y)
    for (int x = 1; x < 5; ++x) img.labels[y * 16 + x] = 3;
  img.designated_class = LabeledGridImage::salient_class(img.labels);
  return img;
}

double cosine(const float* a, const float* b, std::size_t n) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cst_backbone_" + name)).string();
}

TEST(Synthetic, SalientClassIsLargestArea) {
  EXPECT_EQ(LabeledGridImage::salient_class({0, 1, 1, 2, 2, 2}), 2);
  EXPECT_EQ(LabeledGridImage::salient_class({0, 3, 3, 1, 1}), 1);
  EXPECT_EQ(LabeledGridImage::salient_class({0, 0}), 0);
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  auto img = two_rect_image();
  BackboneConfig cfg;
  EXPECT_EQ(synthetic_tokens(img, cfg, 11), synthetic_tokens(img, cfg, 11));
  EXPECT_NE(synthetic_tokens(img, cfg, 11), synthetic_tokens(img, cfg, 12));
}

TEST(Synthetic, NoiselessAttentionIsPlusMinusOnDesignatedCells) {
  auto img = two_rect_image();
  BackboneConfig cfg;
  auto b = synthetic_tokens(img, cfg, 3, {1.0, 0.0});
  const std::size_t c = b.head_dim;
  for (std::size_t m = 0; m < b.heads; ++m) {
    auto q = b.query_rows(m);
    auto k = b.key_rows(m);
    for (std::size_t p = 0; p < b.tokens(); ++p) {
      const double s = cosine(k.data() + (1 + p) * c, q.data(), c);
      if (img.labels[p] == img.designated_class) {
        EXPECT_NEAR(s, 1.0 / std::sqrt(2.0), 1e-6);
      } else {
        EXPECT_NEAR(s, -1.0 / std::sqrt(2.0), 1e-6);
      }
    }
  }
}

TEST(Synthetic, NoiselessClassTokenIsDesignatedEmbedding) {
  auto img = two_rect_image();
  auto b = synthetic_tokens(img, BackboneConfig{}, 3, {2.0, 0.0});
  for (std::size_t l = 0; l < b.layers; ++l)
    for (std::size_t m = 0; m < b.heads; ++m) {
      auto h = b.class_token(l, m);
      for (std::size_t j = 0; j < b.head_dim; ++j)
        EXPECT_FLOAT_EQ(h[j], j == 2 ? 2.0f : 0.0f);
    }
}

TEST(Synthetic, ImageTokensAreScaledOneHot) {
  auto img = two_rect_image();
  auto b = synthetic_tokens(img, BackboneConfig{}, 9, {1.5, 0.0});
  auto blk = b.image_block(1, 2);
  for (std::size_t p = 0; p < b.tokens(); ++p)
    for (std::size_t j = 0; j < b.head_dim; ++j)
      EXPECT_FLOAT_EQ(blk[j * b.tokens() + p], j == std::size_t(img.labels[p]) ? 1.5f : 0.0f);
}

TEST(Synthetic, HeadDimTooSmallIsRejected) {
  auto img = two_rect_image();
  BackboneConfig cfg;
  cfg.head_dim = 4;
  EXPECT_THROW(synthetic_tokens(img, cfg, 0), cst::Error);
}

TEST(Synthetic, EmptyGridIsRejected) {
  LabeledGridImage img;
  EXPECT_THROW(synthetic_tokens(img, BackboneConfig{}, 0), cst::Error);
}

TEST(TokenFile, RoundTripIsElementwiseIdentical) {
  auto b = synthetic_tokens(two_rect_image(), BackboneConfig{}, 5);
  const auto path = temp_path("roundtrip.cstk");
  save_tokens(b, path);
  EXPECT_EQ(load_tokens(path), b);
  std::filesystem::remove(path);
}

TEST(TokenFile, HeaderLayoutIsLittleEndian) {
  BackboneConfig cfg{1, 2, 3, 2, 2};
  auto bytes = encode_tokens(TokenBundle::allocate(cfg));
  ASSERT_GE(bytes.size(), 28u);
  EXPECT_EQ(std::string(bytes.data(), 4), "CSTK");
  const unsigned char expect[] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0,
                                  2, 0, 0, 0, 2, 0, 0, 0};
  for (std::size_t i = 0; i < sizeof expect; ++i)
    EXPECT_EQ(static_cast<unsigned char>(bytes[4 + i]), expect[i]) << i;
  // 1*2*3*4 + 1*2*3 + 2*2*5*3 floats
  EXPECT_EQ(bytes.size(), 28u + 4u * (24 + 6 + 60));
}

TEST(TokenFile, WrongMagicIsCorruptHeader) {
  auto bytes = encode_tokens(TokenBundle::allocate({1, 1, 2, 1, 1}));
  bytes[0] = 'X';
  try {
    decode_tokens(bytes, "mem");
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kCorruptHeader);
  }
}

TEST(TokenFile, ShortPayloadIsTruncated) {
  auto bytes = encode_tokens(TokenBundle::allocate({1, 1, 2, 2, 2}));
  bytes.resize(bytes.size() - 3);
  try {
    decode_tokens(bytes, "mem");
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kTruncatedPayload);
  }
}

TEST(TokenFile, HugeExtentsOverflow) {
  auto bytes = encode_tokens(TokenBundle::allocate({1, 1, 1, 1, 1}));
  for (int f = 0; f < 5; ++f)
    for (int i = 0; i < 4; ++i) bytes[8 + 4 * f + i] = static_cast<char>(0xFF);
  try {
    decode_tokens(bytes, "mem");
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kExtentOverflow);
  }
}

TEST(TokenFile, MissingFileIsNamed) {
  try {
    load_tokens(temp_path("does_not_exist.cstk"));
    FAIL();
  } catch (const cst::Error& e) {
    EXPECT_EQ(e.code(), cst::ErrorCode::kFileNotFound);
  }
}

TEST(ResizeSupport, IdenticalExtentsAreUnchanged) {
  auto b = synthetic_tokens(two_rect_image(), BackboneConfig{}, 5);
  EXPECT_EQ(resize_support_grid(b, 16, 16), b);
}

TEST(ResizeSupport, ConstantFieldStaysConstant) {
  BackboneConfig cfg{1, 2, 3, 50, 50};
  auto b = TokenBundle::allocate(cfg);
  std::fill(b.image_tokens.begin(), b.image_tokens.end(), 0.25f);
  std::fill(b.last_k.begin(), b.last_k.end(), -1.5f);
  std::fill(b.class_tokens.begin(), b.class_tokens.end(), 7.0f);
  auto r = resize_support_grid(b, 12, 12);
  EXPECT_EQ(r.tokens(), 144u);
  for (float v : r.image_tokens) EXPECT_NEAR(v, 0.25f, 1e-7);
  for (float v : r.last_k) EXPECT_NEAR(v, -1.5f, 1e-6);
  EXPECT_EQ(r.class_tokens, b.class_tokens);
}

// Half-pixel bilinear sampling written out directly.
double bilinear_oracle(const std::vector<double>& f, int h, int w, int oh, int ow, int y, int x) {
  auto clampi = [](int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); };
  const double sy = (y + 0.5) * h / oh - 0.5, sx = (x + 0.5) * w / ow - 0.5;
  const double cy = std::max(sy, 0.0), cx = std::max(sx, 0.0);
  const int y0 = clampi(int(std::floor(cy)), 0, h - 1), x0 = clampi(int(std::floor(cx)), 0, w - 1);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ly = cy - y0, lx = cx - x0;
  return (1 - ly) * ((1 - lx) * f[y0 * w + x0] + lx * f[y0 * w + x1]) +
         ly * ((1 - lx) * f[y1 * w + x0] + lx * f[y1 * w + x1]);
}

TEST(ResizeSupport, RampMatchesBilinearOracle) {
  BackboneConfig cfg{1, 1, 2, 4, 4};
  auto b = TokenBundle::allocate(cfg);
  std::vector<double> ramp(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp[y * 4 + x] = 3.0 * x - 2.0 * y + 1.0;
  for (int p = 0; p < 16; ++p) {
    b.image_tokens[p] = float(ramp[p]);
    b.image_tokens[16 + p] = float(-ramp[p]);
    b.last_q[(1 + p) * 2] = float(ramp[p]);
  }
  auto r = resize_support_grid(b, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const double want = bilinear_oracle(ramp, 4, 4, 2, 2, y, x);
      EXPECT_NEAR(r.image_tokens[y * 2 + x], want, 1e-5);
      EXPECT_NEAR(r.image_tokens[4 + y * 2 + x], -want, 1e-5);
      EXPECT_NEAR(r.last_q[(1 + y * 2 + x) * 2], want, 1e-5);
    }
}

TEST(ResizeSupport, ZeroTargetIsRejected) {
  auto b = TokenBundle::allocate({1, 1, 2, 4, 4});
  EXPECT_THROW(resize_support_grid(b, 0, 2), cst::Error);
}

}  // namespace
