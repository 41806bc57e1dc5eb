#include "farseg/fa_loss.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "farseg/errors.hpp"

namespace farseg {

std::string to_string(Annealing kind) {
  switch (kind) {
    case Annealing::kNone: return "none";
    case Annealing::kLinear: return "linear";
    case Annealing::kPoly: return "poly";
    case Annealing::kCosine: return "cosine";
  }
  return "none";
}

Annealing annealing_from_string(const std::string& name) {
  if (name == "none") return Annealing::kNone;
  if (name == "linear") return Annealing::kLinear;
  if (name == "poly") return Annealing::kPoly;
  if (name == "cosine") return Annealing::kCosine;
  throw ConfigError("unknown annealing function '" + name + "' (expected none, linear, poly or cosine)");
}

void FaLossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("loss.gamma must be a finite value >= 0");
  if (annealing_step < 1) throw ConfigError("loss.annealing_step must be >= 1");
  if (!std::isfinite(decay_factor) || decay_factor <= 0.0) throw ConfigError("loss.decay_factor must be > 0");
}

void to_json(nlohmann::json& j, const FaLossConfig& cfg) {
  j = nlohmann::json{{"gamma", cfg.gamma},
                     {"annealing", to_string(cfg.annealing)},
                     {"annealing_step", cfg.annealing_step},
                     {"decay_factor", cfg.decay_factor},
                     {"normalize", cfg.normalize}};
  j["ignore_label"] = cfg.ignore_label ? nlohmann::json(*cfg.ignore_label) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, FaLossConfig& cfg) {
  cfg.gamma = j.value("gamma", cfg.gamma);
  if (j.contains("annealing")) cfg.annealing = annealing_from_string(j.at("annealing").get<std::string>());
  cfg.annealing_step = j.value("annealing_step", cfg.annealing_step);
  cfg.decay_factor = j.value("decay_factor", cfg.decay_factor);
  cfg.normalize = j.value("normalize", cfg.normalize);
  if (j.contains("ignore_label")) {
    const auto& v = j.at("ignore_label");
    cfg.ignore_label = v.is_null() ? std::nullopt : std::optional<int64_t>(v.get<int64_t>());
  }
}

void validate_labels(const torch::Tensor& labels, int64_t num_classes, std::optional<int64_t> ignore_label) {
  auto bad = labels.lt(0).logical_or(labels.ge(num_classes));
  if (ignore_label) bad = bad.logical_and(labels.ne(*ignore_label));
  if (!bad.any().item<bool>()) return;
  auto idx = bad.nonzero()[0];
  std::ostringstream os;
  os << "label " << labels.index({idx[0], idx[1], idx[2]}).item<int64_t>() << " at (b=" << idx[0].item<int64_t>()
     << ", y=" << idx[1].item<int64_t>() << ", x=" << idx[2].item<int64_t>() << ") is outside [0, "
     << num_classes << ")";
  throw DataError(os.str());
}

PixelCrossEntropy per_pixel_ce(const torch::Tensor& logits, const torch::Tensor& labels,
                               std::optional<int64_t> ignore_label) {
  if (logits.dim() != 4 || labels.dim() != 3 || logits.size(0) != labels.size(0) ||
      logits.size(2) != labels.size(1) || logits.size(3) != labels.size(2)) {
    std::ostringstream os;
    os << "cross entropy: logits " << logits.sizes() << " incompatible with labels " << labels.sizes();
    throw ShapeError(os.str());
  }
  validate_labels(labels, logits.size(1), ignore_label);

  PixelCrossEntropy out;
  out.valid = ignore_label ? labels.ne(*ignore_label) : torch::ones_like(labels, torch::kBool);
  out.num_valid = out.valid.sum().item<int64_t>();
  auto target = labels.masked_fill(out.valid.logical_not(), 0).to(torch::kLong).unsqueeze(1);
  auto log_p = torch::log_softmax(logits, 1).gather(1, target).squeeze(1);
  out.loss = (-log_p).masked_fill(out.valid.logical_not(), 0.0);
  out.p_true = log_p.exp();
  return out;
}

torch::Tensor focal_weight(const torch::Tensor& p_true, double gamma) {
  if (gamma == 0.0) return torch::ones_like(p_true);
  return (1.0 - p_true).clamp_min(0.0).pow(gamma);
}

double normalization_constant(const torch::Tensor& weights, const torch::Tensor& loss,
                              const torch::Tensor& valid) {
  torch::NoGradGuard no_grad;
  const auto count = valid.sum().item<int64_t>();
  if (count == 0) throw DataError("normalization constant: every pixel is ignored");
  auto mask = valid.to(loss.scalar_type());
  auto l = (loss.detach() * mask).to(torch::kDouble);
  const double loss_sum = l.sum().item<double>();
  if (loss_sum < kZFloor) return 1.0;
  const double weighted = (weights.detach().to(torch::kDouble) * l).sum().item<double>();
  return weighted / loss_sum;
}

double annealing(int64_t step, const FaLossConfig& cfg) {
  if (step < 0) throw ConfigError("annealing step must be >= 0, got " + std::to_string(step));
  const double ratio =
      static_cast<double>(std::min(step, cfg.annealing_step)) / static_cast<double>(cfg.annealing_step);
  switch (cfg.annealing) {
    case Annealing::kNone: return 0.0;
    case Annealing::kLinear: return 1.0 - ratio;
    case Annealing::kPoly: return std::pow(1.0 - ratio, cfg.decay_factor);
    case Annealing::kCosine: return 0.5 * (1.0 + std::cos(ratio * std::numbers::pi));
  }
  return 0.0;
}

LossBreakdown fa_loss(const torch::Tensor& logits, const torch::Tensor& labels, const FaLossConfig& cfg,
                      int64_t step, std::optional<double> fixed_z) {
  auto ce = per_pixel_ce(logits, labels, cfg.ignore_label);
  if (ce.num_valid == 0) throw DataError("loss: every pixel is ignored");

  LossBreakdown out;
  out.num_valid = ce.num_valid;
  out.ce = ce.loss;
  out.zeta = annealing(step, cfg);

  auto w = focal_weight(ce.p_true, cfg.gamma);
  if (fixed_z) {
    out.z_value = *fixed_z;
  } else {
    out.z_value = cfg.normalize ? normalization_constant(w, ce.loss, ce.valid) : 1.0;
  }
  auto scaled = w / out.z_value;
  out.weights = scaled + out.zeta * (1.0 - scaled);
  out.per_pixel = (out.weights * ce.loss).masked_fill(ce.valid.logical_not(), 0.0);
  out.total = out.per_pixel.sum() / static_cast<double>(ce.num_valid);
  return out;
}

}  // namespace farseg
