// farseg command line: train, eval, predict, visualize-relation, prepare-data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "farseg/checkpoint.hpp"
#include "farseg/config.hpp"
#include "farseg/dataset.hpp"
#include "farseg/errors.hpp"
#include "farseg/evaluation.hpp"
#include "farseg/inference.hpp"
#include "farseg/synth.hpp"
#include "farseg/tiling.hpp"
#include "farseg/trainer.hpp"

namespace fs = std::filesystem;
using farseg::ExitCode;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw farseg::ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw farseg::ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw farseg::DataError("cannot write " + path.string());
  out << text;
}

struct TrainArgs {
  std::string config;
  std::string output = "runs/farseg";
  std::string resume;
  std::vector<std::string> overrides;
  bool tiny = false;
};

int run_train(const TrainArgs& args) {
  nlohmann::json j = args.config.empty() ? nlohmann::json::object() : read_json_file(args.config);
  if (args.tiny) j["profile"] = "tiny";
  farseg::apply_overrides(j, args.overrides);
  const auto cfg = farseg::parse_config(j);
  const bool deterministic = farseg::deterministic_from_env();
  farseg::configure_determinism(deterministic);

  auto data = farseg::load_data(cfg);
  std::cout << "train images: " << data.train.size() << ", val images: " << data.val.size()
            << ", foreground ratio: " << farseg::foreground_ratio(data.train).aggregate
            << (deterministic ? ", deterministic" : "") << "\n";
  farseg::Trainer trainer(cfg, std::move(data.train), std::move(data.val), args.output);
  if (!args.resume.empty()) {
    trainer.resume(args.resume);
    std::cout << "resumed at step " << trainer.step() << "\n";
  }
  const int64_t print_every = std::max<int64_t>(1, cfg.optimizer.max_step / 100);
  trainer.run([&](const farseg::StepRecord& r) {
    if (r.step % print_every == 0) {
      std::cout << "step " << r.step << " loss " << r.loss << " zeta " << r.zeta << " Z " << r.z << " lr " << r.lr
                << "\n";
    }
  });
  for (const auto& v : trainer.validation_log()) {
    std::cout << "val step " << v.step << " mIoU " << v.miou << " fg-mIoU " << v.miou_foreground << "\n";
  }
  std::cout << "checkpoints in " << args.output << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string report = "eval_report.json";
  std::string csv;
  int64_t window = 0;
  int64_t stride = 0;
  std::string palette;
};

int run_eval(const EvalArgs& args) {
  farseg::configure_determinism(farseg::deterministic_from_env());
  auto ck = farseg::load_checkpoint(args.checkpoint);
  const auto k = ck.config.model.num_classes;
  auto loaded = farseg::load_dataset(args.data, k, /*strict=*/false);
  for (const auto& stem : loaded.report.missing_masks) std::cerr << "warning: no mask for " << stem << "\n";
  if (loaded.samples.empty()) throw farseg::DataError("no labeled images under " + args.data);
  std::vector<std::string> names;
  if (!args.palette.empty()) names = farseg::load_color_table(args.palette).class_names;
  const auto window = args.window > 0 ? args.window : ck.config.data.window;
  const auto stride = args.stride > 0 ? args.stride : ck.config.data.stride;
  const auto report = farseg::evaluate_dataset(ck.model, loaded.samples, window, stride, names);
  auto j = report.to_json();
  j["checkpoint"] = args.checkpoint;
  j["checkpoint_step"] = ck.step;
  write_text(args.report, j.dump(2) + "\n");
  if (!args.csv.empty()) write_text(args.csv, report.per_image_csv());
  std::cout << "mIoU " << j["miou"] << " (foreground only " << j["miou_foreground"] << ") over "
            << loaded.samples.size() << " images\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string output = "prediction.png";
  std::string probs_dir;
  int64_t window = 0;
  int64_t stride = 0;
  int64_t num_classes = 0;
};

int run_predict(const PredictArgs& args) {
  farseg::configure_determinism(farseg::deterministic_from_env());
  auto ck = farseg::load_checkpoint(args.checkpoint);
  if (args.num_classes > 0 && args.num_classes != ck.config.model.num_classes) {
    throw farseg::ConfigError("checkpoint predicts " + std::to_string(ck.config.model.num_classes) +
                              " classes, --num-classes asked for " + std::to_string(args.num_classes));
  }
  const auto image = farseg::read_image(args.image);
  const auto window = args.window > 0 ? args.window : ck.config.data.window;
  const auto stride = args.stride > 0 ? args.stride : ck.config.data.stride;
  const auto pred = farseg::predict_image(ck.model, image, window, stride);
  farseg::write_png(args.output, pred.labels);
  if (!args.probs_dir.empty()) {
    for (int64_t c = 0; c < pred.probs.size(0); ++c) {
      auto p = (pred.probs[c].to(torch::kDouble) * 65535.0).round().clamp(0, 65535).to(torch::kInt32).contiguous();
      cv::Mat raster(static_cast<int>(p.size(0)), static_cast<int>(p.size(1)), CV_32S, p.data_ptr<int32_t>());
      cv::Mat out16;
      raster.convertTo(out16, CV_16U);
      farseg::write_png(fs::path(args.probs_dir) / ("prob_class" + std::to_string(c) + ".png"), out16);
    }
  }
  std::cout << "wrote " << args.output << " (" << pred.num_tiles << " tiles)\n";
  return 0;
}

struct VisualizeArgs {
  std::string checkpoint;
  std::string image;
  std::string output_dir = "relation";
  double alpha = 0.5;
};

int run_visualize(const VisualizeArgs& args) {
  farseg::configure_determinism(farseg::deterministic_from_env());
  auto ck = farseg::load_checkpoint(args.checkpoint);
  const auto image = farseg::read_image(args.image);
  const auto stem = fs::path(args.image).stem().string();
  for (const auto& h : farseg::visualize_relation(ck.model, image, args.alpha)) {
    const auto base = fs::path(args.output_dir) / (stem + "_relation_os" + std::to_string(h.output_stride));
    farseg::write_png(base.string() + ".png", h.heatmap);
    if (!h.overlay.empty()) farseg::write_png(base.string() + "_overlay.png", h.overlay);
    std::cout << "wrote " << base.string() << ".png\n";
  }
  return 0;
}

struct SynthArgs {
  std::string config;
  std::string output = "data/synth";
  std::vector<std::string> overrides;
};

int run_prepare_synth(const SynthArgs& args) {
  nlohmann::json j = args.config.empty() ? nlohmann::json(farseg::SynthConfig{}) : read_json_file(args.config);
  farseg::apply_overrides(j, args.overrides);
  farseg::SynthConfig cfg;
  try {
    farseg::from_json(j, cfg);
  } catch (const nlohmann::json::exception& e) {
    throw farseg::ConfigError(std::string("malformed synth config: ") + e.what());
  }
  const auto data = farseg::synth_generate(cfg);
  farseg::save_synth(cfg, data, args.output);
  std::cout << "wrote " << data.samples.size() << " images to " << args.output << " (foreground ratio "
            << data.stats.foreground_ratio() << ")\n";
  return 0;
}

struct ConvertArgs {
  std::string input;
  std::string output;
  std::string palette = FARSEG_DATA_DIR "/isaid_palette.json";
  std::string mask_suffix;
};

int run_prepare_convert(const ConvertArgs& args) {
  const auto table = farseg::load_color_table(args.palette);
  const fs::path in_root(args.input);
  nlohmann::json converted = nlohmann::json::array();
  std::vector<std::string> missing;
  for (const auto& entry : fs::directory_iterator(in_root / "images")) {
    if (!entry.is_regular_file()) continue;
    const auto stem = entry.path().stem().string();
    fs::path mask_path;
    for (const auto& ext : {".png", ".tif", ".bmp"}) {
      auto candidate = in_root / "masks" / (stem + args.mask_suffix + ext);
      if (fs::exists(candidate)) {
        mask_path = candidate;
        break;
      }
    }
    if (mask_path.empty()) {
      missing.push_back(stem);
      continue;
    }
    cv::Mat color = cv::imread(mask_path.string(), cv::IMREAD_COLOR);
    if (color.empty()) throw farseg::DataError("cannot read color mask " + mask_path.string());
    cv::Mat ids;
    try {
      ids = farseg::convert_color_mask(color, table);
    } catch (const farseg::DataError& e) {
      throw farseg::DataError(mask_path.string() + ": " + e.what());
    }
    farseg::write_png(fs::path(args.output) / "images" / (stem + ".png"), farseg::read_image(entry.path()));
    farseg::write_png(fs::path(args.output) / "masks" / (stem + ".png"), ids);
    converted.push_back(stem);
  }
  nlohmann::json manifest{{"generator", "isaid-convert"},
                          {"palette", args.palette},
                          {"converted", converted},
                          {"missing_masks", missing}};
  write_text(fs::path(args.output) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "converted " << converted.size() << " masks, " << missing.size() << " images without mask\n";
  return 0;
}

struct TileArgs {
  std::string input;
  std::string output;
  int64_t window = 896;
  int64_t stride = 512;
  int64_t num_classes = farseg::kIsaidNumClasses;
};

int run_prepare_tile(const TileArgs& args) {
  auto loaded = farseg::load_dataset(args.input, args.num_classes, /*strict=*/true);
  const farseg::Size2 win{args.window, args.window};
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& s : loaded.samples) {
    cv::Mat image = farseg::pad_to_window(s.image, win);
    cv::Mat mask = s.mask;
    if (mask.rows < args.window || mask.cols < args.window) {
      // padded area is not real imagery: exclude it from the loss
      cv::copyMakeBorder(s.mask, mask, 0, std::max<int>(0, static_cast<int>(args.window) - s.mask.rows), 0,
                         std::max<int>(0, static_cast<int>(args.window) - s.mask.cols), cv::BORDER_CONSTANT,
                         cv::Scalar(farseg::kIgnoreLabel));
    }
    const auto grid = farseg::tile({image.rows, image.cols}, win, args.stride);
    for (const auto& o : grid.origins) {
      const cv::Rect r(static_cast<int>(o.x), static_cast<int>(o.y), static_cast<int>(args.window),
                       static_cast<int>(args.window));
      const auto name = s.name + "_y" + std::to_string(o.y) + "_x" + std::to_string(o.x);
      farseg::write_png(fs::path(args.output) / "images" / (name + ".png"), image(r));
      farseg::write_png(fs::path(args.output) / "masks" / (name + ".png"), mask(r));
      tiles.push_back({{"name", name}, {"source", s.name}, {"y", o.y}, {"x", o.x}});
    }
  }
  nlohmann::json manifest{{"generator", "tile"},
                          {"window", args.window},
                          {"stride", args.stride},
                          {"num_sources", loaded.samples.size()},
                          {"tiles", tiles}};
  write_text(fs::path(args.output) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << tiles.size() << " tiles from " << loaded.samples.size() << " images\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"farseg: semantic segmentation of small objects in large aerial images"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model from an experiment config");
  train_cmd->add_option("-c,--config", train.config, "experiment config (JSON)");
  train_cmd->add_option("-o,--output", train.output, "output directory for logs and checkpoints");
  train_cmd->add_option("--resume", train.resume, "checkpoint to resume from");
  train_cmd->add_option("--set", train.overrides, "config override key.path=value (repeatable)");
  train_cmd->add_flag("--tiny", train.tiny, "start from the desk-scale tiny profile");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
  eval_cmd->add_option("-k,--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("-d,--data", eval.data, "dataset root with images/ and masks/")->required();
  eval_cmd->add_option("-r,--report", eval.report, "JSON report path");
  eval_cmd->add_option("--csv", eval.csv, "per-image IoU CSV path");
  eval_cmd->add_option("--window", eval.window, "sliding window size (default: from checkpoint)");
  eval_cmd->add_option("--stride", eval.stride, "sliding window stride (default: from checkpoint)");
  eval_cmd->add_option("--palette", eval.palette, "color table providing class names");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "predict a label raster for one image");
  predict_cmd->add_option("-k,--checkpoint", predict.checkpoint, "checkpoint file")->required();
  predict_cmd->add_option("-i,--image", predict.image, "input image")->required();
  predict_cmd->add_option("-o,--output", predict.output, "output label raster (PNG)");
  predict_cmd->add_option("--probs", predict.probs_dir, "directory for per-class 16-bit probability rasters");
  predict_cmd->add_option("--window", predict.window, "sliding window size (default: from checkpoint)");
  predict_cmd->add_option("--stride", predict.stride, "sliding window stride (default: from checkpoint)");
  predict_cmd->add_option("--num-classes", predict.num_classes, "expected number of classes");

  VisualizeArgs vis;
  auto* vis_cmd = app.add_subcommand("visualize-relation", "export per-level relation heatmaps");
  vis_cmd->add_option("-k,--checkpoint", vis.checkpoint, "checkpoint file")->required();
  vis_cmd->add_option("-i,--image", vis.image, "input image")->required();
  vis_cmd->add_option("-o,--output-dir", vis.output_dir, "output directory");
  vis_cmd->add_option("--alpha", vis.alpha, "overlay opacity; 0 disables overlays")->check(CLI::Range(0.0, 1.0));

  auto* prep_cmd = app.add_subcommand("prepare-data", "build dataset directories");
  prep_cmd->require_subcommand(1);
  SynthArgs synth;
  auto* synth_cmd = prep_cmd->add_subcommand("synth", "generate a synthetic imbalanced dataset");
  synth_cmd->add_option("-c,--config", synth.config, "synth config (JSON)");
  synth_cmd->add_option("-o,--output", synth.output, "output dataset root");
  synth_cmd->add_option("--set", synth.overrides, "override key=value (repeatable)");
  ConvertArgs convert;
  auto* convert_cmd = prep_cmd->add_subcommand("isaid-convert", "convert color-coded masks to class ids");
  convert_cmd->add_option("-i,--input", convert.input, "root with images/ and color masks/")->required();
  convert_cmd->add_option("-o,--output", convert.output, "output dataset root")->required();
  convert_cmd->add_option("--palette", convert.palette, "color table JSON");
  convert_cmd->add_option("--mask-suffix", convert.mask_suffix, "suffix between image stem and mask extension");
  TileArgs tile;
  auto* tile_cmd = prep_cmd->add_subcommand("tile", "crop a dataset into fixed windows");
  tile_cmd->add_option("-i,--input", tile.input, "dataset root")->required();
  tile_cmd->add_option("-o,--output", tile.output, "output dataset root")->required();
  tile_cmd->add_option("--window", tile.window, "window size");
  tile_cmd->add_option("--stride", tile.stride, "window stride");
  tile_cmd->add_option("--num-classes", tile.num_classes, "number of classes in the masks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*predict_cmd) return run_predict(predict);
    if (*vis_cmd) return run_visualize(vis);
    if (*synth_cmd) return run_prepare_synth(synth);
    if (*convert_cmd) return run_prepare_convert(convert);
    if (*tile_cmd) return run_prepare_tile(tile);
  } catch (const farseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfig);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
