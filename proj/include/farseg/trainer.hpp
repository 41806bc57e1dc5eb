#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <torch/torch.h>

#include "farseg/config.hpp"
#include "farseg/dataset.hpp"
#include "farseg/model.hpp"

namespace farseg {

/// Environment variable that switches the CLI into deterministic mode.
inline constexpr const char* kDeterministicEnv = "FARSEG_DETERMINISTIC";

bool deterministic_from_env();

/// Deterministic mode: deterministic kernels and a single intra-op thread.
void configure_determinism(bool deterministic);

struct StepRecord {
  int64_t step = 0;
  double loss = 0.0;
  double zeta = 0.0;
  double z = 1.0;
  double lr = 0.0;
};

struct ValidationRecord {
  int64_t step = 0;
  double miou = 0.0;
  double miou_foreground = 0.0;
};

struct DataSplits {
  Dataset train;
  Dataset val;
};

/// Loads train/val from disk, or generates them from data.synthetic (validation
/// uses the next seed and synthetic_val_images images).
DataSplits load_data(const ExperimentConfig& cfg);

/// Momentum SGD with the poly schedule and the foreground-aware loss.
/// Batch composition and augmentation are pure functions of (seed, step), so a
/// resumed run replays exactly the batches of an uninterrupted one.
class Trainer {
 public:
  Trainer(ExperimentConfig cfg, Dataset train, Dataset val = {}, std::filesystem::path output_dir = {});

  /// Loads model, optimizer and step counter. The checkpoint config must hash-match.
  void resume(const std::filesystem::path& checkpoint);

  StepRecord train_step();
  ValidationRecord validate();

  /// Trains until max_step, validating every eval interval. With an output
  /// directory, writes config.json, train_log.csv, validation.csv and checkpoints.
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  void save(const std::filesystem::path& path);

  /// Images (B x 3 x H x W) and labels (B x H x W) for a step.
  std::pair<torch::Tensor, torch::Tensor> batch(int64_t step) const;

  FarSeg& model() { return model_; }
  torch::optim::SGD& optimizer() { return *optimizer_; }
  const ExperimentConfig& config() const { return cfg_; }
  int64_t step() const { return step_; }
  const std::vector<StepRecord>& log() const { return log_; }
  const std::vector<ValidationRecord>& validation_log() const { return validation_; }
  double best_miou() const { return best_miou_; }

 private:
  const std::vector<int64_t>& epoch_order(uint64_t epoch) const;
  void append_log(const StepRecord& rec);
  [[noreturn]] void numeric_failure(const torch::Tensor& logits, const torch::Tensor& labels, double loss);

  ExperimentConfig cfg_;
  Dataset train_;
  Dataset val_;
  std::filesystem::path output_dir_;
  FarSeg model_{nullptr};
  std::unique_ptr<torch::optim::SGD> optimizer_;
  int64_t step_ = 0;
  std::vector<StepRecord> log_;
  std::vector<ValidationRecord> validation_;
  double best_miou_ = -1.0;
  mutable std::map<uint64_t, std::vector<int64_t>> order_cache_;
};

}  // namespace farseg
