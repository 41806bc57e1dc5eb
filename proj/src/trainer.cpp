#include "farseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "farseg/augment.hpp"
#include "farseg/checkpoint.hpp"
#include "farseg/errors.hpp"
#include "farseg/fa_loss.hpp"
#include "farseg/inference.hpp"
#include "farseg/synth.hpp"

namespace farseg {

namespace fs = std::filesystem;

bool deterministic_from_env() {
  const char* v = std::getenv(kDeterministicEnv);
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

void configure_determinism(bool deterministic) {
  if (!deterministic) return;
  torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(true, /*warn_only=*/false);
}

DataSplits load_data(const ExperimentConfig& cfg) {
  DataSplits out;
  if (!cfg.data.train_root.empty()) {
    auto train = load_dataset(cfg.data.train_root, cfg.model.num_classes, /*strict=*/true);
    out.train = std::move(train.samples);
    if (!cfg.data.val_root.empty()) {
      out.val = load_dataset(cfg.data.val_root, cfg.model.num_classes, /*strict=*/true).samples;
    }
  } else {
    auto synth = *cfg.data.synthetic;
    out.train = synth_generate(synth).labeled();
    synth.seed += 1;
    synth.num_images = cfg.data.synthetic_val_images;
    if (synth.num_images > 0) out.val = synth_generate(synth).labeled();
  }
  if (out.train.empty()) throw DataError("training set is empty");
  return out;
}

Trainer::Trainer(ExperimentConfig cfg, Dataset train, Dataset val, fs::path output_dir)
    : cfg_(std::move(cfg)), train_(std::move(train)), val_(std::move(val)), output_dir_(std::move(output_dir)) {
  cfg_.validate();
  if (train_.empty()) throw DataError("training set is empty");
  const auto size = train_.front().image.size();
  for (const auto& s : train_) {
    validate_sample(s, cfg_.model.num_classes);
    if (s.image.size() != size) {
      throw DataError(s.name + ": training samples must share one size (tile large images first)");
    }
  }
  if (size.height % 32 != 0 || size.width % 32 != 0) {
    throw DataError("training sample size must be divisible by 32");
  }
  if (cfg_.data.augment && size.height != size.width) {
    throw DataError("rotation augmentation needs square training samples");
  }

  torch::manual_seed(cfg_.seed);
  model_ = FarSeg(cfg_.model);
  model_->train();
  optimizer_ = std::make_unique<torch::optim::SGD>(
      model_->parameters(), torch::optim::SGDOptions(cfg_.optimizer.initial_lr)
                                .momentum(cfg_.optimizer.momentum)
                                .weight_decay(cfg_.optimizer.weight_decay));
  if (!output_dir_.empty()) {
    fs::create_directories(output_dir_);
    save_config(cfg_, output_dir_ / "config.json");
  }
}

void Trainer::resume(const fs::path& checkpoint) {
  auto ck = load_checkpoint(checkpoint);
  if (ck.config_hash != config_hash(cfg_)) {
    throw ConfigError("checkpoint " + checkpoint.string() + " was written for a different experiment config");
  }
  {
    torch::NoGradGuard no_grad;
    auto src = ck.model->named_parameters();
    for (auto& p : model_->named_parameters()) p.value().copy_(src[p.key()]);
    auto src_buf = ck.model->named_buffers();
    for (auto& b : model_->named_buffers()) b.value().copy_(src_buf[b.key()]);
  }
  load_optimizer_state(checkpoint, *optimizer_);
  step_ = ck.step;
}

const std::vector<int64_t>& Trainer::epoch_order(uint64_t epoch) const {
  auto it = order_cache_.find(epoch);
  if (it != order_cache_.end()) return it->second;
  if (order_cache_.size() > 4) order_cache_.clear();
  std::vector<int64_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(mix_seed(cfg_.seed) ^ (epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  return order_cache_.emplace(epoch, std::move(order)).first->second;
}

std::pair<torch::Tensor, torch::Tensor> Trainer::batch(int64_t step) const {
  const auto n = static_cast<int64_t>(train_.size());
  std::vector<torch::Tensor> images, labels;
  for (int64_t j = 0; j < cfg_.data.batch_size; ++j) {
    const int64_t global = step * cfg_.data.batch_size + j;
    const auto epoch = static_cast<uint64_t>(global / n);
    const int64_t index = epoch_order(epoch)[static_cast<size_t>(global % n)];
    const auto& sample = train_[static_cast<size_t>(index)];
    const auto t = cfg_.data.augment ? draw_transform(cfg_.seed, epoch, static_cast<uint64_t>(index))
                                     : Transform::kIdentity;
    const auto s = apply_transform(sample, t);
    images.push_back(image_to_tensor(s.image));
    labels.push_back(mask_to_tensor(s.mask));
  }
  return {torch::stack(images), torch::stack(labels)};
}

void Trainer::numeric_failure(const torch::Tensor& logits, const torch::Tensor& labels, double loss) {
  nlohmann::json dump{{"step", step_},
                      {"loss", std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(std::to_string(loss))},
                      {"lr", poly_lr(std::min(step_, cfg_.optimizer.max_step), cfg_.optimizer)}};
  {
    torch::NoGradGuard no_grad;
    auto l = logits.detach().to(torch::kDouble);
    const auto finite = torch::isfinite(l);
    dump["logits_nonfinite"] = (l.numel() - finite.sum().item<int64_t>());
    if (finite.any().item<bool>()) {
      auto vals = l.masked_select(finite);
      dump["logits_min"] = vals.min().item<double>();
      dump["logits_max"] = vals.max().item<double>();
      dump["logits_mean"] = vals.mean().item<double>();
    }
    auto hist = torch::bincount(labels.flatten().clamp(0, 255), {}, 256);
    std::vector<int64_t> counts(hist.data_ptr<int64_t>(), hist.data_ptr<int64_t>() + hist.numel());
    dump["label_histogram"] = counts;
  }
  std::string where;
  if (!output_dir_.empty()) {
    const auto path = output_dir_ / "numeric_failure.json";
    std::ofstream(path) << dump.dump(2) << "\n";
    where = " (batch statistics written to " + path.string() + ")";
  }
  throw NumericError("non-finite loss at step " + std::to_string(step_) + ": " + dump.dump() + where);
}

StepRecord Trainer::train_step() {
  StepRecord rec;
  rec.step = step_;
  rec.lr = poly_lr(step_, cfg_.optimizer);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::SGDOptions&>(group.options()).lr(rec.lr);
  }
  auto [images, labels] = batch(step_);
  const auto dtype = model_->parameters().front().scalar_type();
  images = images.to(dtype);

  optimizer_->zero_grad();
  const int64_t parts = cfg_.data.grad_accumulation;
  double z_sum = 0.0;
  auto image_chunks = images.chunk(parts);
  auto label_chunks = labels.chunk(parts);
  for (int64_t k = 0; k < parts; ++k) {
    auto logits = model_->forward(image_chunks[k]);
    auto loss = fa_loss(logits, label_chunks[k], cfg_.loss, step_);
    const double value = loss.total.item<double>();
    if (!std::isfinite(value)) numeric_failure(logits, label_chunks[k], value);
    (loss.total / static_cast<double>(parts)).backward();
    rec.loss += value / static_cast<double>(parts);
    z_sum += loss.z_value;
    rec.zeta = loss.zeta;
  }
  rec.z = z_sum / static_cast<double>(parts);
  optimizer_->step();
  ++step_;
  append_log(rec);
  return rec;
}

void Trainer::append_log(const StepRecord& rec) {
  log_.push_back(rec);
  if (output_dir_.empty()) return;
  const auto path = output_dir_ / "train_log.csv";
  const bool fresh = !fs::exists(path) || (log_.size() == 1 && rec.step == 0);
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (fresh) out << "step,loss,zeta,z,lr\n";
  out.precision(17);
  out << rec.step << "," << rec.loss << "," << rec.zeta << "," << rec.z << "," << rec.lr << "\n";
}

ValidationRecord Trainer::validate() {
  ValidationRecord rec;
  rec.step = step_;
  if (val_.empty()) return rec;
  const auto report = evaluate_dataset(model_, val_, cfg_.data.window, cfg_.data.stride);
  rec.miou = report.confusion.mean_iou(true);
  try {
    rec.miou_foreground = report.confusion.mean_iou(false);
  } catch (const DataError&) {
    rec.miou_foreground = 0.0;
  }
  validation_.push_back(rec);
  if (!output_dir_.empty()) {
    const auto path = output_dir_ / "validation.csv";
    const bool fresh = !fs::exists(path) || validation_.size() == 1;
    std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) out << "step,miou,miou_foreground\n";
    out << rec.step << "," << rec.miou << "," << rec.miou_foreground << "\n";
  }
  return rec;
}

void Trainer::save(const fs::path& path) { save_checkpoint(path, cfg_, model_, optimizer_.get(), step_); }

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  const int64_t interval = cfg_.resolved_eval_interval();
  while (step_ < cfg_.optimizer.max_step) {
    const auto rec = train_step();
    if (on_step) on_step(rec);
    if (step_ % interval == 0 || step_ == cfg_.optimizer.max_step) {
      const auto v = validate();
      if (!output_dir_.empty()) {
        save(output_dir_ / "checkpoints" / ("step_" + std::to_string(step_) + ".ckpt"));
        save(output_dir_ / "last.ckpt");
        if (!val_.empty() && v.miou > best_miou_) save(output_dir_ / "best.ckpt");
      }
      if (!val_.empty()) best_miou_ = std::max(best_miou_, v.miou);
    }
  }
}

}  // namespace farseg
