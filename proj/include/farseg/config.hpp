#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "farseg/fa_loss.hpp"
#include "farseg/model.hpp"
#include "farseg/synth.hpp"

namespace farseg {

struct OptimizerConfig {
  double initial_lr = 0.007;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  int64_t max_step = 60000;
  double power = 0.9;
};

struct DataConfig {
  std::string train_root;
  std::string val_root;
  int64_t window = 896;
  int64_t stride = 512;
  int64_t batch_size = 8;
  int64_t grad_accumulation = 1;  // micro-batches per optimizer step
  bool augment = true;
  // used when train_root is empty: train on generated data, validate on a second draw
  std::optional<SynthConfig> synthetic;
  int64_t synthetic_val_images = 16;
};

struct ExperimentConfig {
  std::string name = "farseg";
  ModelConfig model;
  FaLossConfig loss;
  OptimizerConfig optimizer;
  DataConfig data;
  uint64_t seed = 0;
  int64_t eval_interval = 0;  // 0: every 10% of max_step

  /// Desk-scale defaults: 64x64 synthetic images, tiny backbone, batch 8,
  /// width-96 heads, lr 0.03, 2000 steps, annealing over the first 400.
  static ExperimentConfig tiny_profile();

  /// Throws ConfigError on the first invalid value.
  void validate() const;
  int64_t resolved_eval_interval() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& cfg);
void from_json(const nlohmann::json& j, OptimizerConfig& cfg);
void to_json(nlohmann::json& j, const DataConfig& cfg);
void from_json(const nlohmann::json& j, DataConfig& cfg);
void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

/// Parses a JSON config. A top-level "profile": "tiny" starts from the tiny
/// profile instead of the full-scale defaults; other keys override it.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Applies "dotted.key=value" overrides; the value is parsed as JSON when possible, else taken as a string.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// lr = initial_lr * (1 - step / max_step)^power; steps past max_step give 0 (with a warning).
double poly_lr(int64_t step, const OptimizerConfig& cfg);

}  // namespace farseg
