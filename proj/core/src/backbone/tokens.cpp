#include "cst/backbone/tokens.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>

#include "../binary_io.hpp"
#include "cst/error.hpp"
#include "cst/numerics/ops.hpp"

namespace cst::backbone {

void BackboneConfig::validate() const {
  if (layers == 0 || heads == 0 || head_dim == 0 || grid_h == 0 || grid_w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "backbone config: all extents must be positive");
  }
}

std::span<const float> TokenBundle::image_block(std::size_t layer, std::size_t head) const {
  const std::size_t n = head_dim * tokens();
  return {image_tokens.data() + (layer * heads + head) * n, n};
}

std::span<const float> TokenBundle::class_token(std::size_t layer, std::size_t head) const {
  return {class_tokens.data() + (layer * heads + head) * head_dim, head_dim};
}

std::span<const float> TokenBundle::query_rows(std::size_t head) const {
  const std::size_t n = (1 + tokens()) * head_dim;
  return {last_q.data() + head * n, n};
}

std::span<const float> TokenBundle::key_rows(std::size_t head) const {
  const std::size_t n = (1 + tokens()) * head_dim;
  return {last_k.data() + head * n, n};
}

TokenBundle TokenBundle::allocate(const BackboneConfig& cfg) {
  cfg.validate();
  TokenBundle b;
  b.layers = cfg.layers;
  b.heads = cfg.heads;
  b.head_dim = cfg.head_dim;
  b.grid_h = cfg.grid_h;
  b.grid_w = cfg.grid_w;
  b.image_tokens.assign(cfg.layers * cfg.heads * cfg.head_dim * cfg.tokens(), 0.0f);
  b.class_tokens.assign(cfg.layers * cfg.heads * cfg.head_dim, 0.0f);
  b.last_q.assign(cfg.heads * (1 + cfg.tokens()) * cfg.head_dim, 0.0f);
  b.last_k.assign(b.last_q.size(), 0.0f);
  return b;
}

void TokenBundle::check_consistent() const {
  const std::size_t t = tokens();
  if (image_tokens.size() != layers * heads * head_dim * t ||
      class_tokens.size() != layers * heads * head_dim ||
      last_q.size() != heads * (1 + t) * head_dim || last_k.size() != last_q.size()) {
    throw Error(ErrorCode::kShapeMismatch, "token bundle: buffers disagree with extents");
  }
}

int LabeledGridImage::salient_class(const std::vector<int>& labels) {
  std::map<int, std::size_t> area;
  for (int c : labels)
    if (c > 0) ++area[c];
  int best = 0;
  std::size_t best_area = 0;
  for (auto [c, a] : area) {
    if (a > best_area) {
      best = c;
      best_area = a;
    }
  }
  return best;
}

TokenBundle synthetic_tokens(const LabeledGridImage& image, const BackboneConfig& cfg,
                             std::uint64_t seed, const SyntheticSignal& signal) {
  if (image.height == 0 || image.width == 0 || image.labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic_tokens: empty grid");
  }
  if (image.labels.size() != image.height * image.width) {
    throw Error(ErrorCode::kShapeMismatch, "synthetic_tokens: label buffer size mismatch");
  }
  BackboneConfig c = cfg;
  c.grid_h = image.height;
  c.grid_w = image.width;
  c.validate();
  const int max_class = *std::max_element(image.labels.begin(), image.labels.end());
  if (static_cast<std::size_t>(std::max(max_class, image.designated_class)) + 2 > c.head_dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic_tokens: head_dim " + std::to_string(c.head_dim) +
                    " too small for class id " + std::to_string(max_class));
  }

  const std::size_t t = c.tokens(), dim = c.head_dim, sal = dim - 1;
  const double s = signal.strength;
  TokenBundle b = TokenBundle::allocate(c);

  auto noise_source = [&](std::uint64_t tag, std::size_t a, std::size_t bidx) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(a),
                      static_cast<std::uint32_t>(bidx)};
    return std::mt19937_64(seq);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t l = 0; l < c.layers; ++l) {
    for (std::size_t m = 0; m < c.heads; ++m) {
      auto rng = noise_source(1, l, m);
      float* block = b.image_tokens.data() + (l * c.heads + m) * dim * t;
      for (std::size_t p = 0; p < t; ++p) {
        const auto cls = static_cast<std::size_t>(image.labels[p]);
        for (std::size_t j = 0; j < dim; ++j) {
          const double v = (j == cls ? s : 0.0) + signal.noise * gauss(rng);
          block[j * t + p] = static_cast<float>(v);
        }
      }
      // Class token summarises the designated object (all tokens if absent).
      std::size_t count = 0;
      std::vector<double> acc(dim, 0.0);
      for (std::size_t p = 0; p < t; ++p) {
        if (image.designated_class == 0 || image.labels[p] != image.designated_class) continue;
        ++count;
        for (std::size_t j = 0; j < dim; ++j) acc[j] += block[j * t + p];
      }
      if (count == 0) {
        for (std::size_t p = 0; p < t; ++p)
          for (std::size_t j = 0; j < dim; ++j) acc[j] += block[j * t + p];
        count = t;
      }
      float* ct = b.class_tokens.data() + (l * c.heads + m) * dim;
      for (std::size_t j = 0; j < dim; ++j) ct[j] = static_cast<float>(acc[j] / count);
    }
  }

  for (std::size_t m = 0; m < c.heads; ++m) {
    auto rng = noise_source(2, m, 0);
    float* q = b.last_q.data() + m * (1 + t) * dim;
    float* k = b.last_k.data() + m * (1 + t) * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      q[j] = static_cast<float>((j == sal ? s : 0.0) + signal.noise * gauss(rng));
      k[j] = static_cast<float>((j == sal ? s : 0.0) + signal.noise * gauss(rng));
    }
    for (std::size_t p = 0; p < t; ++p) {
      const int cls = image.labels[p];
      const double salience =
          (image.designated_class != 0 && cls == image.designated_class) ? 1.0 : -1.0;
      float* qr = q + (1 + p) * dim;
      float* kr = k + (1 + p) * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        const double onehot = j == static_cast<std::size_t>(cls) ? s : 0.0;
        qr[j] = static_cast<float>(onehot + signal.noise * gauss(rng));
        kr[j] = static_cast<float>(onehot + (j == sal ? s * salience : 0.0) +
                                   signal.noise * gauss(rng));
      }
    }
  }
  return b;
}

namespace {

// Resamples `rows` x `dim` token rows laid out on a grid_h x grid_w grid.
std::vector<float> resize_rows(const float* rows, std::size_t dim, std::size_t gh, std::size_t gw,
                               std::size_t th, std::size_t tw) {
  std::vector<double> chw(dim * gh * gw);
  for (std::size_t p = 0; p < gh * gw; ++p)
    for (std::size_t j = 0; j < dim; ++j) chw[j * gh * gw + p] = rows[p * dim + j];
  auto out = num::ops::bilinear_resize(num::Tensor::from({dim, gh, gw}, std::move(chw)), th, tw);
  std::vector<float> res(th * tw * dim);
  auto v = out.values();
  for (std::size_t p = 0; p < th * tw; ++p)
    for (std::size_t j = 0; j < dim; ++j) res[p * dim + j] = static_cast<float>(v[j * th * tw + p]);
  return res;
}

}  // namespace

TokenBundle resize_support_grid(const TokenBundle& bundle, std::size_t target_h,
                                std::size_t target_w) {
  if (target_h == 0 || target_w == 0) {
    throw Error(ErrorCode::kShapeMismatch, "resize_support_grid: target extents must be positive");
  }
  bundle.check_consistent();
  if (target_h == bundle.grid_h && target_w == bundle.grid_w) return bundle;
  num::NoGradGuard no_grad;
  BackboneConfig cfg = bundle.config();
  cfg.grid_h = target_h;
  cfg.grid_w = target_w;
  TokenBundle out = TokenBundle::allocate(cfg);
  out.class_tokens = bundle.class_tokens;
  const std::size_t t_in = bundle.tokens(), t_out = cfg.tokens(), dim = bundle.head_dim;
  for (std::size_t l = 0; l < bundle.layers; ++l) {
    for (std::size_t m = 0; m < bundle.heads; ++m) {
      auto src = bundle.image_block(l, m);
      std::vector<double> chw(src.begin(), src.end());
      auto res = num::ops::bilinear_resize(
          num::Tensor::from({dim, bundle.grid_h, bundle.grid_w}, std::move(chw)), target_h,
          target_w);
      float* dst = out.image_tokens.data() + (l * bundle.heads + m) * dim * t_out;
      auto v = res.values();
      for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<float>(v[i]);
    }
  }
  for (std::size_t m = 0; m < bundle.heads; ++m) {
    for (auto [src_all, dst_all] : {std::pair{&bundle.last_q, &out.last_q},
                                    std::pair{&bundle.last_k, &out.last_k}}) {
      const float* src = src_all->data() + m * (1 + t_in) * dim;
      float* dst = dst_all->data() + m * (1 + t_out) * dim;
      std::copy(src, src + dim, dst);
      auto rows = resize_rows(src + dim, dim, bundle.grid_h, bundle.grid_w, target_h, target_w);
      std::copy(rows.begin(), rows.end(), dst + dim);
    }
  }
  return out;
}

std::vector<char> encode_tokens(const TokenBundle& bundle) {
  bundle.check_consistent();
  io::ByteWriter w;
  w.bytes("CSTK");
  w.u32(kTokenFileVersion);
  for (std::size_t e : {bundle.layers, bundle.heads, bundle.head_dim, bundle.grid_h, bundle.grid_w})
    w.u32(static_cast<std::uint32_t>(e));
  for (const auto* buf : {&bundle.image_tokens, &bundle.class_tokens, &bundle.last_q, &bundle.last_k})
    for (float v : *buf) w.f32(v);
  return w.data();
}

TokenBundle decode_tokens(const std::vector<char>& bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  if (r.remaining() < 8 || r.bytes(4) != "CSTK") {
    throw Error(ErrorCode::kCorruptHeader, what + ": bad token-file magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kTokenFileVersion) {
    throw Error(ErrorCode::kCorruptHeader,
                what + ": unsupported token-file version " + std::to_string(version));
  }
  if (r.remaining() < 20) {
    throw Error(ErrorCode::kCorruptHeader, what + ": header shorter than 28 bytes");
  }
  std::uint64_t ext[5];
  for (auto& e : ext) {
    e = r.u32();
    if (e == 0) throw Error(ErrorCode::kCorruptHeader, what + ": zero extent in header");
  }
  // Total float count: L*M*C*T + L*M*C + 2*M*(1+T)*C, computed with overflow
  // checks against the addressable byte range.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 16;
  auto mul = [&](std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > limit / a) {
      throw Error(ErrorCode::kExtentOverflow, what + ": header extents overflow");
    }
    return a * b;
  };
  const std::uint64_t t = mul(ext[3], ext[4]);
  const std::uint64_t lmc = mul(mul(ext[0], ext[1]), ext[2]);
  const std::uint64_t total = mul(lmc, t) + lmc + mul(mul(2 * ext[1], t + 1), ext[2]);
  if (total > limit / 4 || total * 4 > std::numeric_limits<std::size_t>::max()) {
    throw Error(ErrorCode::kExtentOverflow, what + ": header extents overflow");
  }
  r.need(static_cast<std::size_t>(total * 4));
  TokenBundle b = TokenBundle::allocate({static_cast<std::size_t>(ext[0]), static_cast<std::size_t>(ext[1]),
                                         static_cast<std::size_t>(ext[2]), static_cast<std::size_t>(ext[3]),
                                         static_cast<std::size_t>(ext[4])});
  for (auto* buf : {&b.image_tokens, &b.class_tokens, &b.last_q, &b.last_k})
    for (float& v : *buf) v = r.f32();
  return b;
}

void save_tokens(const TokenBundle& bundle, const std::string& path) {
  io::write_file(path, encode_tokens(bundle));
}

TokenBundle load_tokens(const std::string& path) {
  return decode_tokens(io::read_file(path, ErrorCode::kFileNotFound), path);
}

}  // namespace cst::backbone
