#include "cst/numerics/param_store.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <utility>

#include "../binary_io.hpp"
#include "cst/error.hpp"

namespace cst::num {

Tensor& ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (entries_.count(name)) {
    throw Error(ErrorCode::kInvalidArgument, "param store: duplicate entry '" + name + "'");
  }
  auto [it, _] = entries_.emplace(name, Tensor::from(std::move(shape), std::move(values), true));
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "param store: no entry '" + name + "'");
  }
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParamStore::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) {
    out.entries_.emplace(name, t.detach_copy(t.requires_grad()));
  }
  out.adam_m_ = adam_m_;
  out.adam_v_ = adam_v_;
  out.step_count_ = step_count_;
  return out;
}

void ParamStore::absorb(const ParamStore& other) {
  for (const auto& [name, t] : other.entries_) {
    add(name, t.shape(), {t.values().begin(), t.values().end()});
  }
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "param store: expected " + std::to_string(entries_.size()) + " entries, got " +
                    std::to_string(other.entries_.size()));
  }
  for (auto& [name, t] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end()) {
      throw Error(ErrorCode::kShapeMismatch, "param store: missing entry '" + name + "'");
    }
    if (it->second.shape() != t.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "param store: entry '" + name + "' has shape " +
                                                 shape_str(it->second.shape()) + ", expected " +
                                                 shape_str(t.shape()));
    }
    auto src = it->second.values();
    auto dst = t.mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void adam_step(ParamStore& store, const AdamOptions& options) {
  for (const auto& [name, t] : store.entries_) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) {
        throw Error(ErrorCode::kNonFinite, "adam: non-finite gradient in '" + name + "'");
      }
    }
  }
  const auto step = static_cast<double>(store.step_count_ + 1);
  const double bc1 = 1.0 - std::pow(options.beta1, step);
  const double bc2 = 1.0 - std::pow(options.beta2, step);
  for (auto& [name, t] : store.entries_) {
    auto& m = store.adam_m_[name];
    auto& v = store.adam_v_[name];
    if (m.size() != t.numel()) {
      m.assign(t.numel(), 0.0);
      v.assign(t.numel(), 0.0);
    }
    auto values = t.mutable_values();
    const bool has = t.has_grad();
    auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g;
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= options.lr * mhat / (std::sqrt(vhat) + options.eps);
    }
    t.zero_grad();
  }
  ++store.step_count_;
}

void adam_step(ParamStore& store, double lr) {
  AdamOptions options;
  options.lr = lr;
  adam_step(store, options);
}

std::vector<char> encode_checkpoint(const ParamStore& store) {
  io::ByteWriter w;
  w.bytes("CSTP");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [name, t] : store.entries()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    for (double v : t.values()) w.f64(v);
  }
  return w.data();
}

ParamStore decode_checkpoint(const std::vector<char>& bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  if (r.remaining() < 12 || r.bytes(4) != "CSTP") {
    throw Error(ErrorCode::kCorruptHeader, what + ": bad checkpoint magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kCorruptHeader,
                what + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  ParamStore store;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t len = r.u32();
    std::string name = r.bytes(len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) {
      throw Error(ErrorCode::kCorruptHeader,
                  what + ": entry '" + name + "' has implausible rank " + std::to_string(rank));
    }
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& extent : shape) {
      const std::uint64_t ext = r.u64();
      if (ext != 0 && numel > std::numeric_limits<std::uint64_t>::max() / 8 / ext) {
        throw Error(ErrorCode::kExtentOverflow, what + ": extents of '" + name + "' overflow");
      }
      numel *= ext;
      extent = static_cast<std::size_t>(ext);
    }
    r.need(static_cast<std::size_t>(numel * 8));
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (double& v : values) v = r.f64();
    store.add(name, std::move(shape), std::move(values));
  }
  return store;
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  io::write_file(path, encode_checkpoint(store));
}

ParamStore load_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path, ErrorCode::kCheckpointNotFound), path);
}

}  // namespace cst::num
