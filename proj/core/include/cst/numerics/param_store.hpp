#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cst/numerics/tensor.hpp"

namespace cst::num {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named learnable tensors plus the Adam moment buffers that update them.
// Iteration order is lexicographic by name, so serialisation is stable.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Shape shape, std::vector<double> values);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const std::map<std::string, Tensor>& entries() const { return entries_; }

  // Number of scalar parameters whose names start with `prefix`.
  std::size_t count(const std::string& prefix = "") const;
  std::uint64_t step_count() const { return step_count_; }
  bool has_moments(const std::string& name) const { return adam_m_.count(name) != 0; }

  void zero_grad();
  // Deep copy of values and optimizer state; the copy shares no storage.
  ParamStore clone() const;
  // Copies every entry of `other` (values only) under its own name.
  void absorb(const ParamStore& other);
  // Overwrites values from `other`; names and shapes must match exactly.
  void assign_values(const ParamStore& other);

  friend void adam_step(ParamStore& store, const AdamOptions& options);

 private:
  std::map<std::string, Tensor> entries_;
  std::map<std::string, std::vector<double>> adam_m_;
  std::map<std::string, std::vector<double>> adam_v_;
  std::uint64_t step_count_ = 0;
};

// One bias-corrected Adam update over every entry; gradients are zeroed
// afterwards. Entries that never received a gradient are treated as zero.
// Throws kNonFinite (before touching any value) if a gradient is NaN/Inf.
void adam_step(ParamStore& store, const AdamOptions& options);
void adam_step(ParamStore& store, double lr);

// Binary checkpoint: "CSTP", u32 version, u32 entry count, then per entry
// u32 name length, name bytes, u32 rank, u64 extents, f64 values (all LE).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);
std::vector<char> encode_checkpoint(const ParamStore& store);
ParamStore decode_checkpoint(const std::vector<char>& bytes, const std::string& what);

}  // namespace cst::num
