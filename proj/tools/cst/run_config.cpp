#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cst/error.hpp"

namespace cst::cli {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      {"manifest", ""},
      {"val_manifest", ""},
      {"checkpoint", ""},
      {"history", ""},
      {"out", "run"},
      {"seed", "0"},
      {"supervision", "pixel"},
      {"pixel_fraction", "0.1"},
      {"way", "1"},
      {"shot", "1"},
      {"episodes", "1000"},
      {"workers", "1"},
      {"lr", "0.001"},
      {"lambda", "0.1"},
      {"delta", "0.5"},
      {"alpha", "-0.1"},
      {"steps", "2000"},
      {"accumulate", "1"},
      {"episode_pool", "0"},
      {"val_interval", "200"},
      {"val_episodes", "100"},
      {"log_interval", "1"},
      {"out_channels", "128"},
      {"attn_heads", "4"},
      {"pool_kernels", "4,3"},
      {"support_h", "12"},
      {"support_w", "12"},
      {"decoupled_heads", "true"},
      {"use_multihead", "true"},
      {"enhancer_hidden", "32"},
      {"enhancer_lr", "0.001"},
      {"enhancer_steps", "200"},
      {"enhancer_batch", "8"},
      {"backbone_layers", "2"},
      {"backbone_heads", "4"},
      {"backbone_head_dim", "8"},
      {"signal_strength", "1.0"},
      {"signal_noise", "0.05"},
      {"train_images", "400"},
      {"val_images", "100"},
      {"test_images", "100"},
      {"num_classes", "4"},
      {"image_height", "16"},
      {"image_width", "16"},
      {"materialize_tokens", "true"},
      {"panels", "6"},
  };
  return d;
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kConfigInvalid, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

std::string RunConfig::normalize(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

bool RunConfig::known(const std::string& key) { return defaults().count(normalize(key)) != 0; }

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto k = normalize(key);
  if (!known(k)) bad("unknown config key '" + key + "'");
  values_[k] = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "config file not found: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    set(trim(line.substr(0, eq)), value);
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) bad("unexpected argument '" + a + "'");
    const auto body = a.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      set(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!known(body)) bad("unknown option '" + a + "'");
    if (i + 1 >= args.size()) bad("option '" + a + "' needs a value");
    set(body, args[++i]);
  }
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(normalize(key));
  if (it == values_.end()) bad("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto& v = str(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad(key + ": expected a number, got '" + v + "'");
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

std::uint64_t RunConfig::u64(const std::string& key) const {
  const auto& v = str(key);
  if (!v.empty() && std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
    }
  }
  bad(key + ": expected a non-negative integer, got '" + v + "'");
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; }))
      bad(key + ": expected a comma-separated list of integers");
    out.push_back(std::stoull(item));
  }
  return out;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

backbone::BackboneConfig RunConfig::backbone() const {
  backbone::BackboneConfig b;
  b.layers = count("backbone_layers");
  b.heads = count("backbone_heads");
  b.head_dim = count("backbone_head_dim");
  b.grid_h = count("image_height");
  b.grid_w = count("image_width");
  return b;
}

backbone::SyntheticSignal RunConfig::signal() const {
  return {real("signal_strength"), real("signal_noise")};
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig c;
  c.model.out_channels = count("out_channels");
  c.model.attn_heads = count("attn_heads");
  c.model.pool_kernels = counts("pool_kernels");
  c.model.support_h = count("support_h");
  c.model.support_w = count("support_w");
  c.model.decoupled_heads = flag("decoupled_heads");
  c.model.use_multihead = flag("use_multihead");
  c.lr = real("lr");
  c.lambda = real("lambda");
  c.delta = real("delta");
  c.alpha = real("alpha");
  c.steps = count("steps");
  c.accumulate = count("accumulate");
  c.episode_pool = count("episode_pool");
  c.val_interval = count("val_interval");
  c.val_episodes = count("val_episodes");
  c.val_way = count("way");
  c.val_shot = count("shot");
  c.log_interval = count("log_interval");
  c.workers = count("workers");
  c.seed = u64("seed");
  c.regime.mode = data::parse_supervision(str("supervision"));
  c.regime.pixel_fraction = real("pixel_fraction");
  c.enhancer.hidden = count("enhancer_hidden");
  c.enhancer.lr = real("enhancer_lr");
  c.enhancer.steps = count("enhancer_steps");
  c.enhancer.batch = count("enhancer_batch");
  c.validate();
  return c;
}

train::EvalConfig RunConfig::eval_config() const {
  train::EvalConfig c;
  c.way = count("way");
  c.shot = count("shot");
  c.episodes = count("episodes");
  c.workers = count("workers");
  c.seed = u64("seed");
  c.delta = real("delta");
  if (c.way == 0 || c.shot == 0 || c.workers == 0) bad("way, shot and workers must be positive");
  return c;
}

data::SyntheticDataSpec RunConfig::synthetic_spec() const {
  data::SyntheticDataSpec s;
  s.train_images = count("train_images");
  s.val_images = count("val_images");
  s.test_images = count("test_images");
  s.num_classes = count("num_classes");
  s.height = count("image_height");
  s.width = count("image_width");
  s.seed = u64("seed");
  return s;
}

}  // namespace cst::cli
