#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cst/error.hpp"
#include "cst/numerics/param_store.hpp"
#include "cst/pgm.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "svg.hpp"

namespace cst::cli {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { kError, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("CST_LOG");
  const std::string v = env ? env : "info";
  if (v == "error") return LogLevel::kError;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << msg << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
}

const std::string& required(const RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.str(key);
  if (v.empty()) throw Error(ErrorCode::kConfigInvalid, "missing required setting '" + key + "'");
  return v;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path out = required(cfg, "out");
  fs::create_directories(out);
  write_text(out / "config.resolved", cfg.resolved());
  return out;
}

std::unique_ptr<data::DatasetView> open_view(const RunConfig& cfg, const std::string& key) {
  auto manifest = data::DatasetManifest::load(required(cfg, key));
  manifest.validate();
  return std::make_unique<data::DatasetView>(std::move(manifest), cfg.backbone(), cfg.signal());
}

train::SupervisionResolver test_resolver(const RunConfig& cfg, const num::ParamStore& params) {
  data::SupervisionRegime regime{data::parse_supervision(cfg.str("supervision")),
                                 cfg.real("pixel_fraction")};
  auto enhancer = train::extract_enhancer(params);
  if (regime.mode == data::SupervisionMode::kMixed && !enhancer) {
    throw Error(ErrorCode::kConfigInvalid,
                "mixed supervision needs a checkpoint that carries enhancer weights");
  }
  return train::SupervisionResolver(regime, cfg.real("alpha"), enhancer, true);
}

int cmd_train(const RunConfig& cfg) {
  const auto tc = cfg.train_config();
  const auto out = prepare_out(cfg);
  auto train_view = open_view(cfg, "manifest");
  std::unique_ptr<data::DatasetView> val_view;
  if (!cfg.str("val_manifest").empty()) val_view = open_view(cfg, "val_manifest");
  const auto level = log_level();
  auto result = train::train(tc, *train_view, val_view.get(), [&](const train::HistoryRecord& h) {
    if (h.validated && level >= LogLevel::kInfo)
      log(LogLevel::kInfo, "step " + std::to_string(h.step) + " val_miou " +
                               std::to_string(h.val_miou) + " best " + std::to_string(h.best_miou));
    else
      log(LogLevel::kDebug, h.to_json());
  });
  train::write_history(result.history, (out / "history.jsonl").string());
  num::save_checkpoint(result.best, (out / "best.ckpt").string());
  write_text(out / "params.json", train::param_report(result.best) + "\n");
  if (val_view) {
    const auto resolver = test_resolver(cfg, result.best);
    auto ec = cfg.eval_config();
    const auto report = train::evaluate(train::model_predictor(result.best, tc.model), *val_view,
                                        resolver, ec, tc.model.support_h, tc.model.support_w);
    write_text(out / "report.json", report.to_json() + "\n");
    log(LogLevel::kInfo, "validation report: miou " + std::to_string(report.miou) +
                             " exact " + std::to_string(report.exact_ratio));
  }
  log(LogLevel::kInfo, "best step " + std::to_string(result.best_step) + ", wrote " + out.string());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const auto tc = cfg.train_config();
  const auto ec = cfg.eval_config();
  fs::path ckpt = cfg.str("checkpoint");
  if (ckpt.empty()) ckpt = fs::path(cfg.str("out")) / "best.ckpt";
  const auto params = num::load_checkpoint(ckpt.string());
  auto view = open_view(cfg, "manifest");
  const auto out = prepare_out(cfg);
  const auto resolver = test_resolver(cfg, params);
  const auto report = train::evaluate(train::model_predictor(params, tc.model), *view, resolver, ec,
                                      tc.model.support_h, tc.model.support_w);
  write_text(out / "report.json", report.to_json() + "\n");
  write_text(out / "params.json", train::param_report(params) + "\n");
  std::cout << report.to_json() << '\n';
  return 0;
}

int cmd_pseudomask(const RunConfig& cfg) {
  auto view = open_view(cfg, "manifest");
  const auto mode = data::parse_supervision(cfg.str("supervision"));
  std::shared_ptr<const num::ParamStore> enhancer;
  if (mode == data::SupervisionMode::kMixed) {
    fs::path ckpt = cfg.str("checkpoint");
    if (ckpt.empty()) ckpt = fs::path(cfg.str("out")) / "best.ckpt";
    enhancer = train::extract_enhancer(num::load_checkpoint(ckpt.string()));
    if (!enhancer) throw Error(ErrorCode::kConfigInvalid, "checkpoint carries no enhancer weights");
  }
  const auto out = prepare_out(cfg);
  fs::create_directories(out / "masks");
  const double alpha = cfg.real("alpha");
  std::size_t agree = 0, total = 0;
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < view->size(); ++i) {
    const auto tokens = view->tokens(i);
    const auto [h, w] = view->image_size(i);
    const auto stack = pseudo::attention_scores(*tokens, *tokens, pseudo::AttentionMode::kSelf);
    const auto mask = enhancer ? pseudo::enhance(stack, *enhancer, h, w)
                               : pseudo::raw_pseudomask(stack, false, true, h, w, alpha);
    pseudo::export_mask_pgm(mask, (out / "masks" / (view->record(i).name + ".pgm")).string());
    const auto lm = view->labels(i);
    const auto gt = data::class_mask(lm->labels, backbone::LabeledGridImage::salient_class(lm->labels));
    std::size_t a = 0;
    for (std::size_t p = 0; p < gt.size(); ++p) a += (mask.values[p] > 0.5) == (gt[p] != 0);
    per[view->record(i).name] = static_cast<double>(a) / static_cast<double>(gt.size());
    agree += a;
    total += gt.size();
  }
  nlohmann::json summary{{"images", view->size()},
                         {"pixel_agreement", total ? static_cast<double>(agree) / total : 0.0},
                         {"per_image", per}};
  write_text(out / "pseudomask.json", summary.dump(2) + "\n");
  log(LogLevel::kInfo, "wrote " + std::to_string(view->size()) + " masks, pixel agreement " +
                           std::to_string(summary["pixel_agreement"].get<double>()));
  return 0;
}

int cmd_gen_data(const RunConfig& cfg) {
  const auto spec = cfg.synthetic_spec();
  const fs::path out = required(cfg, "out");
  const auto ds = data::generate_synthetic_dataset(spec);
  data::write_synthetic_dataset(ds, out.string(), cfg.backbone(), cfg.signal(),
                                cfg.flag("materialize_tokens"));
  log(LogLevel::kInfo, "wrote synthetic dataset to " + out.string());
  return 0;
}

int cmd_plot(const RunConfig& cfg) {
  const fs::path out = required(cfg, "out");
  fs::path history = cfg.str("history");
  if (history.empty()) history = out / "history.jsonl";
  std::ifstream in(history);
  if (!in) throw Error(ErrorCode::kFileNotFound, "history not found: " + history.string());
  Series loss{"loss_total", {}}, clf{"loss_clf", {}}, seg{"loss_seg", {}}, miou{"val_miou", {}},
      best{"best_miou", {}};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, "history: " + std::string(e.what()));
    }
    const double step = j.at("step").get<double>();
    loss.points.emplace_back(step, j.at("loss_total").get<double>());
    clf.points.emplace_back(step, j.at("loss_clf").get<double>());
    seg.points.emplace_back(step, j.at("loss_seg").get<double>());
    if (j.contains("val_miou")) {
      miou.points.emplace_back(step, j["val_miou"].get<double>());
      best.points.emplace_back(step, j["best_miou"].get<double>());
    }
  }
  fs::create_directories(out / "plots");
  write_text(out / "plots" / "loss.svg", line_chart("training loss", "step", {loss, clf, seg}));
  if (!miou.points.empty())
    write_text(out / "plots" / "val_miou.svg", line_chart("validation mIoU (%)", "step", {miou, best}));
  if (!cfg.str("manifest").empty() && fs::exists(out / "masks")) {
    auto view = open_view(cfg, "manifest");
    std::vector<MaskPanel> panels;
    for (std::size_t i = 0; i < view->size() && panels.size() < cfg.count("panels"); ++i) {
      const auto path = out / "masks" / (view->record(i).name + ".pgm");
      if (!fs::exists(path)) continue;
      const auto lm = view->labels(i);
      MaskPanel p{view->record(i).name, lm->height, lm->width, {}, {}};
      const int cls = backbone::LabeledGridImage::salient_class(lm->labels);
      for (int l : lm->labels) p.truth.push_back(l == cls);
      for (auto v : read_pgm(path.string()).pixels) p.predicted.push_back(v > 127);
      panels.push_back(std::move(p));
    }
    write_text(out / "plots" / "masks.svg", mask_panels(panels));
  }
  log(LogLevel::kInfo, "wrote plots to " + (out / "plots").string());
  return 0;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFileNotFound:
    case ErrorCode::kCheckpointNotFound:
    case ErrorCode::kManifestNotFound: return 2;
    case ErrorCode::kConfigInvalid: return 3;
    case ErrorCode::kCorruptHeader:
    case ErrorCode::kExtentOverflow:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kInsufficientClasses:
    case ErrorCode::kInsufficientImages:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kUnknownClass:
    case ErrorCode::kZeroEpisodes:
    case ErrorCode::kInvalidArgument: return 4;
    default: return 1;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"cst: few-shot classification and segmentation from frozen transformer tokens"};
  app.require_subcommand(1);
  std::string config_path;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Command commands[] = {
      {"train", "meta-train on a manifest", cmd_train},
      {"eval", "evaluate a checkpoint on a manifest", cmd_eval},
      {"pseudomask", "write attention pseudo-masks for a manifest", cmd_pseudomask},
      {"gen-data", "write a synthetic dataset", cmd_gen_data},
      {"plot", "render SVG curves and mask panels", cmd_plot},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "flat key = value settings file");
    sub->allow_extras();
    sub->footer("Any setting can be overridden with --key value, e.g. --seed 7 --supervision image");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "ERROR CONFIG_INVALID: " << e.what() << '\n';
    return 3;
  }
  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      RunConfig cfg;
      if (!config_path.empty()) cfg.load_file(config_path);
      cfg.apply_overrides(subs[i]->remaining());
      return commands[i].fn(cfg);
    }
  } catch (const Error& e) {
    std::cerr << "ERROR " << code_name(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ERROR INTERNAL: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace cst::cli
