#pragma once

#include <cmath>
#include <random>
#include <string>

#include "cst/numerics/ops.hpp"
#include "cst/numerics/param_store.hpp"

namespace cst::layers {

// Uniform He fan-in initialisation, zero bias.
inline void add_weight(num::ParamStore& store, const std::string& name, num::Shape shape,
                       std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(num::shape_numel(shape));
  for (double& v : w) v = u(rng);
  store.add(name, std::move(shape), std::move(w));
}

inline void add_linear(num::ParamStore& store, const std::string& name, std::size_t in,
                       std::size_t out, std::mt19937_64& rng) {
  add_weight(store, name + ".w", {in, out}, in, rng);
  store.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

inline void add_conv(num::ParamStore& store, const std::string& name, std::size_t in,
                     std::size_t out, std::size_t k, std::mt19937_64& rng) {
  add_weight(store, name + ".w", {out, in, k, k}, in * k * k, rng);
  store.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

inline void add_group_norm(num::ParamStore& store, const std::string& name, std::size_t c) {
  store.add(name + ".g", {c}, std::vector<double>(c, 1.0));
  store.add(name + ".b", {c}, std::vector<double>(c, 0.0));
}

inline num::Tensor linear(const num::ParamStore& p, const std::string& name, const num::Tensor& x) {
  return num::ops::linear(x, p.get(name + ".w"), p.get(name + ".b"));
}

inline num::Tensor conv(const num::ParamStore& p, const std::string& name, const num::Tensor& x) {
  return num::ops::conv2d(x, p.get(name + ".w"), p.get(name + ".b"));
}

inline num::Tensor group_norm(const num::ParamStore& p, const std::string& name,
                              const num::Tensor& x, std::size_t groups) {
  return num::ops::group_norm(x, p.get(name + ".g"), p.get(name + ".b"), groups);
}

}  // namespace cst::layers
