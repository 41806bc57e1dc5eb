#include "farseg/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "farseg/errors.hpp"

namespace farseg {

ExperimentConfig ExperimentConfig::tiny_profile() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.model.backbone = BackboneConfig::tiny();
  cfg.model.fpn_channels = 96;
  cfg.model.embed_dim = 96;
  cfg.model.decoder_channels = 96;
  cfg.model.num_classes = 4;
  cfg.loss.annealing_step = 400;
  cfg.optimizer.initial_lr = 0.03;
  cfg.optimizer.max_step = 2000;
  cfg.data.window = 64;
  cfg.data.stride = 64;
  cfg.data.batch_size = 8;
  SynthConfig synth;
  synth.num_images = 64;
  synth.height = 64;
  synth.width = 64;
  synth.num_classes = cfg.model.num_classes;
  synth.target_foreground_ratio = 0.02;
  cfg.data.synthetic = synth;
  cfg.data.synthetic_val_images = 32;
  return cfg;
}

void ExperimentConfig::validate() const {
  model.validate();
  loss.validate();
  if (!(optimizer.initial_lr > 0.0) || !std::isfinite(optimizer.initial_lr)) {
    throw ConfigError("optimizer.initial_lr must be > 0");
  }
  if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) throw ConfigError("optimizer.momentum must be in [0, 1)");
  if (optimizer.weight_decay < 0.0) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (optimizer.max_step < 1) throw ConfigError("optimizer.max_step must be >= 1");
  if (optimizer.power < 0.0) throw ConfigError("optimizer.power must be >= 0");
  if (data.window < 32 || data.window % 32 != 0) throw ConfigError("data.window must be a positive multiple of 32");
  if (data.stride < 1 || data.stride > data.window) throw ConfigError("data.stride must be in [1, window]");
  if (data.batch_size < 1) throw ConfigError("data.batch_size must be >= 1");
  if (data.grad_accumulation < 1 || data.batch_size % data.grad_accumulation != 0) {
    throw ConfigError("data.grad_accumulation must divide data.batch_size");
  }
  if (data.train_root.empty() && !data.synthetic) {
    throw ConfigError("data.train_root is empty and no data.synthetic generator is configured");
  }
  if (data.synthetic) {
    data.synthetic->validate();
    if (data.synthetic->num_classes != model.num_classes) {
      throw ConfigError("data.synthetic.num_classes must equal model.num_classes");
    }
  }
  if (eval_interval < 0) throw ConfigError("eval_interval must be >= 0");
}

int64_t ExperimentConfig::resolved_eval_interval() const {
  return eval_interval > 0 ? eval_interval : std::max<int64_t>(1, optimizer.max_step / 10);
}

void to_json(nlohmann::json& j, const OptimizerConfig& cfg) {
  j = nlohmann::json{{"initial_lr", cfg.initial_lr},
                     {"momentum", cfg.momentum},
                     {"weight_decay", cfg.weight_decay},
                     {"max_step", cfg.max_step},
                     {"power", cfg.power}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& cfg) {
  cfg.initial_lr = j.value("initial_lr", cfg.initial_lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.max_step = j.value("max_step", cfg.max_step);
  cfg.power = j.value("power", cfg.power);
}

void to_json(nlohmann::json& j, const DataConfig& cfg) {
  j = nlohmann::json{{"train_root", cfg.train_root},
                     {"val_root", cfg.val_root},
                     {"window", cfg.window},
                     {"stride", cfg.stride},
                     {"batch_size", cfg.batch_size},
                     {"grad_accumulation", cfg.grad_accumulation},
                     {"augment", cfg.augment},
                     {"synthetic_val_images", cfg.synthetic_val_images}};
  j["synthetic"] = cfg.synthetic ? nlohmann::json(*cfg.synthetic) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DataConfig& cfg) {
  cfg.train_root = j.value("train_root", cfg.train_root);
  cfg.val_root = j.value("val_root", cfg.val_root);
  cfg.window = j.value("window", cfg.window);
  cfg.stride = j.value("stride", cfg.stride);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.grad_accumulation = j.value("grad_accumulation", cfg.grad_accumulation);
  cfg.augment = j.value("augment", cfg.augment);
  cfg.synthetic_val_images = j.value("synthetic_val_images", cfg.synthetic_val_images);
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    if (s.is_null()) {
      cfg.synthetic.reset();
    } else {
      SynthConfig synth = cfg.synthetic.value_or(SynthConfig{});
      from_json(s, synth);
      cfg.synthetic = synth;
    }
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = nlohmann::json{{"name", cfg.name},     {"model", cfg.model}, {"loss", cfg.loss},
                     {"optimizer", cfg.optimizer}, {"data", cfg.data},   {"seed", cfg.seed},
                     {"eval_interval", cfg.eval_interval}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  cfg.name = j.value("name", cfg.name);
  if (j.contains("model")) from_json(j.at("model"), cfg.model);
  if (j.contains("loss")) from_json(j.at("loss"), cfg.loss);
  if (j.contains("optimizer")) from_json(j.at("optimizer"), cfg.optimizer);
  if (j.contains("data")) from_json(j.at("data"), cfg.data);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.eval_interval = j.value("eval_interval", cfg.eval_interval);
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    const auto profile = j.value("profile", std::string{});
    if (profile == "tiny") {
      cfg = ExperimentConfig::tiny_profile();
    } else if (!profile.empty() && profile != "full") {
      throw ConfigError("unknown profile '" + profile + "' (expected tiny or full)");
    }
    from_json(j, cfg);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << nlohmann::json(cfg).dump(2) << "\n";
}

void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
    const auto key = item.substr(0, eq);
    const auto text = item.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      value = text;
    }
    nlohmann::json::json_pointer ptr("/" + [&] {
      std::string p = key;
      for (auto& c : p) c = c == '.' ? '/' : c;
      return p;
    }());
    j[ptr] = value;
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  const auto text = nlohmann::json(cfg).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

double poly_lr(int64_t step, const OptimizerConfig& cfg) {
  if (step < 0) throw ConfigError("learning-rate step must be >= 0");
  if (step > cfg.max_step) {
    std::cerr << "warning: step " << step << " is past max_step " << cfg.max_step << "; learning rate clamped to 0\n";
    return 0.0;
  }
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(cfg.max_step);
  return cfg.initial_lr * std::pow(frac, cfg.power);
}

}  // namespace farseg
