#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "farseg/config.hpp"
#include "farseg/model.hpp"

namespace farseg {

/// Checkpoint container layout (torch archive), stable within a format major version:
///   format_version  int    kCheckpointFormat
///   step            int    next step to run
///   config_hash     string config_hash(config)
///   config          string resolved experiment config (JSON)
///   model           archive of parameters and buffers
///   optimizer       archive of SGD state (may be absent)
inline constexpr int64_t kCheckpointFormat = 1;

struct Checkpoint {
  ExperimentConfig config;
  int64_t step = 0;
  std::string config_hash;
  FarSeg model{nullptr};
};

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, FarSeg& model,
                     torch::optim::SGD* optimizer, int64_t step);

/// Rebuilds the model from the stored config and loads its weights. Throws
/// DataError for unreadable files, unknown format versions or hash mismatches.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Restores optimizer state from a checkpoint written with one.
void load_optimizer_state(const std::filesystem::path& path, torch::optim::SGD& optimizer);

}  // namespace farseg
