#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cst/backbone/tokens.hpp"
#include "cst/episodes/dataset.hpp"
#include "cst/trainer/trainer.hpp"

namespace cst::cli {

// Flat key = value settings. Every key has a default; unknown keys are
// rejected with kConfigInvalid.
class RunConfig {
 public:
  RunConfig();

  static bool known(const std::string& key);
  static std::string normalize(std::string key);  // dashes become underscores

  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  // --key value / --key=value pairs.
  void apply_overrides(const std::vector<std::string>& args);

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;

  // Sorted "key = value" lines.
  std::string resolved() const;

  train::TrainConfig train_config() const;
  train::EvalConfig eval_config() const;
  backbone::BackboneConfig backbone() const;
  backbone::SyntheticSignal signal() const;
  data::SyntheticDataSpec synthetic_spec() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cst::cli
