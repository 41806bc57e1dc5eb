#include "farseg/checkpoint.hpp"

#include "farseg/errors.hpp"

namespace farseg {

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, FarSeg& model,
                     torch::optim::SGD* optimizer, int64_t step) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointFormat));
  archive.write("step", c10::IValue(step));
  archive.write("config_hash", c10::IValue(config_hash(cfg)));
  archive.write("config", c10::IValue(nlohmann::json(cfg).dump()));
  torch::serialize::OutputArchive model_archive;
  model->save(model_archive);
  archive.write("model", model_archive);
  if (optimizer) {
    torch::serialize::OutputArchive optim_archive;
    optimizer->save(optim_archive);
    archive.write("optimizer", optim_archive);
  }
  // write-then-rename so an interrupted save never clobbers the previous checkpoint
  const auto tmp = path.string() + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

namespace {

torch::serialize::InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw DataError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  c10::IValue version, step, hash, config;
  archive.read("format_version", version);
  if (version.toInt() != kCheckpointFormat) {
    throw DataError("checkpoint " + path.string() + " has format version " + std::to_string(version.toInt()) +
                    ", expected " + std::to_string(kCheckpointFormat));
  }
  archive.read("step", step);
  archive.read("config_hash", hash);
  archive.read("config", config);

  Checkpoint ck;
  ck.config = parse_config(nlohmann::json::parse(config.toStringRef()));
  ck.step = step.toInt();
  ck.config_hash = hash.toStringRef();
  if (config_hash(ck.config) != ck.config_hash) {
    throw DataError("checkpoint " + path.string() + ": stored config does not match its hash");
  }
  ck.model = FarSeg(ck.config.model);
  torch::serialize::InputArchive model_archive;
  if (!archive.try_read("model", model_archive)) throw DataError("checkpoint " + path.string() + " has no model");
  ck.model->load(model_archive);
  return ck;
}

void load_optimizer_state(const std::filesystem::path& path, torch::optim::SGD& optimizer) {
  auto archive = open_archive(path);
  torch::serialize::InputArchive optim_archive;
  if (!archive.try_read("optimizer", optim_archive)) {
    throw DataError("checkpoint " + path.string() + " carries no optimizer state");
  }
  optimizer.load(optim_archive);
}

}  // namespace farseg
