// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "farseg/config.hpp"
#include "farseg/evaluation.hpp"
#include "farseg/fa_loss.hpp"
#include "farseg/inference.hpp"
#include "farseg/model.hpp"
#include "farseg/synth.hpp"
#include "farseg/tiling.hpp"
#include "farseg/trainer.hpp"
#include "support/oracles.hpp"
#include "support/reference_iou.hpp"

using namespace farseg;
using torch::indexing::Slice;

namespace {

constexpr double kSumTol = 1e-6;
constexpr double kBoundaryTol = 1e-9;
constexpr double kMidpointTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kOracleTol = 1e-6;
constexpr double kIouTol = 1e-12;
constexpr double kOverfitLoss = 0.05;
constexpr double kOverfitMiou = 0.95;
constexpr int64_t kOverfitSteps = 500;
constexpr int64_t kDeterminismSteps = 50;
constexpr double kSumSeconds = 10;
constexpr double kShapeSeconds = 60;
constexpr double kOverfitSeconds = 5 * 60;
constexpr double kImbalanceSeconds = 30 * 60;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

torch::Tensor random_labels(std::vector<int64_t> shape, int64_t k, double ignore_fraction) {
  auto labels = torch::randint(0, k, shape, torch::kLong);
  auto ignore = torch::rand(shape) < ignore_fraction;
  return labels.masked_fill(ignore, 255);
}

FaLossConfig linear_config(double gamma, int64_t annealing_step) {
  FaLossConfig cfg;
  cfg.gamma = gamma;
  cfg.annealing = Annealing::kLinear;
  cfg.annealing_step = annealing_step;
  return cfg;
}

// 1. Loss-sum preservation
Outcome sum_preservation() {
  Stopwatch sw;
  torch::manual_seed(1);
  // linear annealing over 100 steps: zeta = 1 - t / 100
  const std::vector<std::pair<double, int64_t>> zetas{{0.0, 100}, {0.37, 63}, {1.0, 0}};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto logits = torch::randn({2, 6, 16, 16}) * 3.0;
    auto labels = random_labels({2, 16, 16}, 6, 0.05);
    for (double gamma : {0.5, 1.0, 2.0, 5.0}) {
      const auto cfg = linear_config(gamma, 100);
      for (const auto& [zeta, step] : zetas) {
        const auto out = fa_loss(logits, labels, cfg, step);
        if (std::abs(out.zeta - zeta) > 1e-12) return {false, "annealing did not produce zeta " + fmt(zeta)};
        const double weighted = out.per_pixel.to(torch::kDouble).sum().item<double>();
        const double plain = out.ce.to(torch::kDouble).sum().item<double>();
        worst = std::max(worst, std::abs(weighted - plain) / plain);
      }
    }
  }
  const double t = sw.seconds();
  return {worst < kSumTol && t < kSumSeconds,
          "max relative error " + fmt(worst, 3) + " (< " + fmt(kSumTol) + "), " + fmt(t, 3) + " s"};
}

// 2. Boundary identities against an independent double-precision oracle
Outcome boundary_identities() {
  torch::manual_seed(2);
  double worst_ce = 0.0, worst_focal = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = torch::randn({2, 5, 7, 9}, torch::kDouble) * 2.5;
    auto labels = random_labels({2, 7, 9}, 5, 0.1);
    const auto ref = oracle::cross_entropy(logits, labels);
    double sum_l = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < ref.loss.size(); ++i)
      if (ref.valid[i]) {
        sum_l += ref.loss[i];
        ++n;
      }
    for (double gamma : {0.5, 2.0, 5.0}) {
      auto cfg = linear_config(gamma, 50);
      cfg.annealing = Annealing::kCosine;
      worst_ce = std::max(worst_ce, std::abs(fa_loss(logits, labels, cfg, 0).total.item<double>() - sum_l / n));

      double sum_wl = 0.0;
      for (size_t i = 0; i < ref.loss.size(); ++i)
        if (ref.valid[i]) sum_wl += std::pow(1.0 - ref.p_true[i], gamma) * ref.loss[i];
      const double z = sum_wl / sum_l;
      const double focal = sum_wl / z / n;
      for (int64_t t : {50, 51, 500})
        worst_focal = std::max(worst_focal, std::abs(fa_loss(logits, labels, cfg, t).total.item<double>() - focal));
    }
  }
  return {worst_ce < kBoundaryTol && worst_focal < kBoundaryTol,
          "t=0 vs CE " + fmt(worst_ce, 3) + ", t>=T vs normalized focal " + fmt(worst_focal, 3) + " (< " +
              fmt(kBoundaryTol) + ")"};
}

// 3. Annealing table
Outcome annealing_table() {
  constexpr int64_t kSteps = 10000;
  std::vector<std::string> failures;
  for (auto kind : {Annealing::kLinear, Annealing::kPoly, Annealing::kCosine}) {
    FaLossConfig cfg;
    cfg.annealing = kind;
    cfg.annealing_step = kSteps;
    const auto name = to_string(kind);
    if (annealing(0, cfg) != 1.0) failures.push_back(name + " zeta(0)");
    if (annealing(kSteps, cfg) != 0.0) failures.push_back(name + " zeta(T)");
    double prev = INFINITY;
    for (int i = 0; i < 1000; ++i) {
      const double z = annealing(i * kSteps / 999, cfg);
      if (z > prev || z < 0.0 || z > 1.0) {
        failures.push_back(name + " not monotone at grid point " + std::to_string(i));
        break;
      }
      prev = z;
    }
  }
  FaLossConfig cosine;
  cosine.annealing = Annealing::kCosine;
  cosine.annealing_step = kSteps;
  FaLossConfig poly = cosine;
  poly.annealing = Annealing::kPoly;
  const double cos_mid = annealing(kSteps / 2, cosine);
  const double poly_mid = annealing(kSteps / 2, poly);
  if (std::abs(cos_mid - 0.5) > kMidpointTol) failures.push_back("cosine midpoint " + fmt(cos_mid, 17));
  if (std::abs(poly_mid - std::pow(0.5, 0.9)) > kMidpointTol) failures.push_back("poly midpoint " + fmt(poly_mid, 17));
  std::string detail = "cosine(T/2)=" + fmt(cos_mid, 15) + " poly(T/2)=" + fmt(poly_mid, 15);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// 4. Finite-difference gradient check with Z held fixed
Outcome gradient_check() {
  torch::manual_seed(4);
  auto logits = torch::randn({2, 4, 3, 3}, torch::kDouble);
  auto labels = random_labels({2, 3, 3}, 4, 0.0);
  labels[1][2][2] = 255;
  auto cfg = linear_config(2.0, 100);
  cfg.annealing = Annealing::kCosine;
  double worst = 0.0;
  bool stop_gradient = true;
  for (int64_t step : {0, 30, 100}) {
    auto x = logits.clone().requires_grad_(true);
    auto out = fa_loss(x, labels, cfg, step);
    out.total.backward();
    auto grad = x.grad().clone();
    const double z = out.z_value;

    auto x2 = logits.clone().requires_grad_(true);
    fa_loss(x2, labels, cfg, step, z).total.backward();
    stop_gradient = stop_gradient && torch::allclose(grad, x2.grad(), 0.0, 1e-15);

    constexpr double h = 1e-6;
    auto fd = torch::zeros_like(logits);
    auto flat = logits.view(-1);
    auto fd_flat = fd.view(-1);
    for (int64_t i = 0; i < flat.numel(); ++i) {
      auto plus = logits.clone(), minus = logits.clone();
      plus.view(-1)[i] += h;
      minus.view(-1)[i] -= h;
      const double fp = fa_loss(plus, labels, cfg, step, z).total.item<double>();
      const double fm = fa_loss(minus, labels, cfg, step, z).total.item<double>();
      fd_flat[i] = (fp - fm) / (2 * h);
    }
    worst = std::max(worst, ((grad - fd).norm() / fd.norm()).item<double>());
  }
  return {worst < kGradTol && stop_gradient,
          "relative error " + fmt(worst, 3) + " (< " + fmt(kGradTol) + ")" +
              (stop_gradient ? "" : "; gradient depends on Z through the batch")};
}

// 5. End-to-end shapes on the tiny backbone
Outcome shape_suite() {
  Stopwatch sw;
  torch::manual_seed(5);
  const auto mcfg = ExperimentConfig::tiny_profile().model;
  FarSeg model(mcfg);
  model->eval();
  torch::NoGradGuard no_grad;
  std::vector<std::string> failures;
  for (auto [h, w] : std::vector<std::pair<int64_t, int64_t>>{{32, 32}, {64, 96}, {896, 896}}) {
    const auto out = model->forward_all(torch::randn({1, 3, h, w}));
    const auto tag = std::to_string(h) + "x" + std::to_string(w);
    if (out.logits.sizes() != torch::IntArrayRef{1, mcfg.num_classes, h, w}) failures.push_back(tag + " logits");
    for (int level = kMinLevel; level <= kMaxLevel; ++level) {
      const auto& p = out.pyramid.levels[level];
      const int64_t stride = level_stride(level);
      if (p.size(2) * stride != h || p.size(3) * stride != w) failures.push_back(tag + " P" + std::to_string(level));
      if (out.relation->relation[level].size(1) != 1) failures.push_back(tag + " r" + std::to_string(level));
      auto& decoder = model->decoder();
      const int expected_up = level - 2;
      if (decoder->num_upsampling_units(level) != expected_up) failures.push_back("upsampling units");
      const auto decoded = decoder->decode_level(out.relation->enhanced[level], level);
      if (decoded.size(2) != h / 4 || decoded.size(3) != w / 4) failures.push_back(tag + " decode " + std::to_string(level));
    }
  }
  const double t = sw.seconds();
  if (t >= kShapeSeconds) failures.push_back("runtime");
  std::string detail = "3 input sizes, 4 levels, " + fmt(t, 3) + " s";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

void randomize_bn(ConvBnRelu& m) {
  torch::NoGradGuard no_grad;
  m->bn->running_mean.uniform_(-0.5, 0.5);
  m->bn->running_var.uniform_(0.5, 2.0);
  m->bn->weight.uniform_(0.5, 1.5);
  m->bn->bias.uniform_(-0.2, 0.2);
}

// 6. Pyramid, scene embedding, relation and gating against per-pixel loops
Outcome brute_force_relation() {
  torch::manual_seed(6);
  ModelConfig mcfg;
  mcfg.fpn_channels = 4;
  mcfg.embed_dim = 4;
  mcfg.decoder_channels = 4;
  mcfg.num_classes = 3;
  FarSeg model(mcfg);
  model->to(torch::kDouble);
  for (int level = kMinLevel; level <= kMaxLevel; ++level) {
    randomize_bn(model->relation()->projection(level));
    randomize_bn(model->relation()->encoder(level));
  }
  model->eval();
  torch::NoGradGuard no_grad;
  // 32 x 32 input: P_2 is 8 x 8
  const auto out = model->forward_all(torch::randn({1, 3, 32, 32}, torch::kDouble));

  LevelMap<oracle::Grid> c;
  LevelMap<oracle::Linear> lateral;
  for (int level = kMinLevel; level <= kMaxLevel; ++level) {
    c[level] = oracle::from_tensor(out.features.levels[level]);
    lateral[level] = oracle::linear_of(model->fpn()->lateral(level));
  }
  const auto p = oracle::fpn(c, lateral);
  const auto u = oracle::matvec(oracle::spatial_mean(c[5]), oracle::linear_of(model->relation()->scene_encoder()));

  double err_p = 0.0, err_u = 0.0, err_r = 0.0, err_z = 0.0;
  const auto& rel = *out.relation;
  for (size_t j = 0; j < u[0].size(); ++j)
    err_u = std::max(err_u, std::abs(u[0][j] - rel.scene.u[0][static_cast<int64_t>(j)].item<double>()));
  for (int level = kMinLevel; level <= kMaxLevel; ++level) {
    err_p = std::max(err_p, oracle::max_abs_diff(p[level], out.pyramid.levels[level]));
    const auto v = oracle::conv_bn_relu_eval(p[level], model->relation()->projection(level));
    const auto r = oracle::inner_product(u, v);
    const auto e = oracle::conv_bn_relu_eval(p[level], model->relation()->encoder(level));
    err_r = std::max(err_r, oracle::max_abs_diff(r, rel.relation[level]));
    err_z = std::max(err_z, oracle::max_abs_diff(oracle::gated(r, e), rel.enhanced[level]));
  }
  const double worst = std::max({err_p, err_u, err_r, err_z});
  return {worst < kOracleTol, "max |diff| P " + fmt(err_p, 3) + ", u " + fmt(err_u, 3) + ", r " + fmt(err_r, 3) +
                                  ", z " + fmt(err_z, 3) + " (< " + fmt(kOracleTol) + ")"};
}

// The batch used by the overfit check: one batch of synthetic images, replayed every step.
ExperimentConfig overfit_config() {
  auto cfg = ExperimentConfig::tiny_profile();
  cfg.data.augment = false;
  cfg.data.synthetic->num_images = cfg.data.batch_size;
  cfg.data.synthetic->target_foreground_ratio = 0.15;
  cfg.data.synthetic->min_diameter = 12;
  cfg.data.synthetic->max_diameter = 32;
  cfg.optimizer.max_step = kOverfitSteps;
  cfg.eval_interval = kOverfitSteps;
  return cfg;
}

// 7. Single-batch overfit
Outcome single_batch_overfit() {
  Stopwatch sw;
  configure_determinism(true);
  const auto cfg = overfit_config();
  auto data = load_data(cfg);
  Trainer trainer(cfg, data.train);
  for (int64_t i = 0; i < kOverfitSteps; ++i) trainer.train_step();
  const double loss = trainer.log().back().loss;

  auto [images, labels] = trainer.batch(0);
  auto& model = trainer.model();
  model->eval();
  torch::NoGradGuard no_grad;
  auto logits = model->forward(images);
  ConfusionMatrix cm(cfg.model.num_classes);
  cm.accumulate(logits.argmax(1), labels);
  const double miou = cm.mean_iou();
  const double t = sw.seconds();
  return {loss < kOverfitLoss && miou > kOverfitMiou && t < kOverfitSeconds,
          "loss " + fmt(loss) + " (< " + fmt(kOverfitLoss) + "), batch mIoU " + fmt(miou) + " (> " +
              fmt(kOverfitMiou) + "), " + fmt(t, 3) + " s"};
}

enum class Variant { kCrossEntropy, kForegroundAware, kUnnormalizedFocal, kGamma5 };

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kCrossEntropy: return "CE";
    case Variant::kForegroundAware: return "FA";
    case Variant::kUnnormalizedFocal: return "focal";
    case Variant::kGamma5: return "FA(gamma=5)";
  }
  return "?";
}

ExperimentConfig imbalance_config(Variant v, uint64_t seed) {
  auto cfg = ExperimentConfig::tiny_profile();
  cfg.seed = seed;
  cfg.loss.normalize = true;
  cfg.loss.annealing = Annealing::kCosine;
  switch (v) {
    case Variant::kCrossEntropy: cfg.loss.gamma = 0.0; break;
    case Variant::kForegroundAware: cfg.loss.gamma = 2.0; break;
    case Variant::kUnnormalizedFocal:
      cfg.loss.gamma = 2.0;
      cfg.loss.normalize = false;
      cfg.loss.annealing = Annealing::kNone;
      break;
    case Variant::kGamma5: cfg.loss.gamma = 5.0; break;
  }
  return cfg;
}

struct RunResult {
  double miou_foreground = 0.0;
  bool finite = true;
  double seconds = 0.0;
};

constexpr std::array<uint64_t, 3> kSeeds{0, 1, 2};

/// Full tiny-profile training runs, cached so that criteria 8 and 9 share them.
class ImbalanceRuns {
 public:
  const RunResult& get(Variant v, uint64_t seed) {
    const auto key = std::make_pair(static_cast<int>(v), seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Stopwatch sw;
    configure_determinism(true);
    const auto cfg = imbalance_config(v, seed);
    auto data = load_data(cfg);
    Trainer trainer(cfg, data.train, data.val);
    RunResult r;
    try {
      trainer.run();
      r.miou_foreground = trainer.validation_log().back().miou_foreground;
    } catch (const NumericError&) {
      r.finite = false;
    }
    r.seconds = sw.seconds();
    std::cerr << "  " << to_string(v) << " seed " << seed << ": foreground mIoU " << fmt(r.miou_foreground) << " ("
              << fmt(r.seconds, 3) << " s)\n";
    return cache_.emplace(key, r).first->second;
  }

  std::vector<double> medians_input(Variant v, double* seconds = nullptr, bool* finite = nullptr) {
    std::vector<double> out;
    for (auto s : kSeeds) {
      const auto& r = get(v, s);
      out.push_back(r.miou_foreground);
      if (seconds) *seconds += r.seconds;
      if (finite) *finite = *finite && r.finite;
    }
    return out;
  }

 private:
  std::map<std::pair<int, uint64_t>, RunResult> cache_;
};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt(x, 3);
  return s;
}

// 8. Foreground-aware optimization beats plain cross entropy on imbalanced data
Outcome imbalance_benefit(ImbalanceRuns& runs) {
  double seconds = 0.0;
  bool finite = true;
  const auto fa = runs.medians_input(Variant::kForegroundAware, &seconds, &finite);
  const auto ce = runs.medians_input(Variant::kCrossEntropy, &seconds, &finite);
  const auto focal = runs.medians_input(Variant::kUnnormalizedFocal, &seconds, &finite);
  const double m_fa = median(fa), m_ce = median(ce), m_focal = median(focal);
  return {finite && m_fa > m_ce && m_focal <= m_fa && seconds < kImbalanceSeconds,
          "median foreground mIoU FA " + fmt(m_fa) + " [" + join(fa) + "] vs CE " + fmt(m_ce) + " [" + join(ce) +
              "], unnormalized focal " + fmt(m_focal) + " [" + join(focal) + "], " + fmt(seconds, 4) + " s"};
}

// 9. Focusing-factor sweep
Outcome gamma_sweep(ImbalanceRuns& runs) {
  bool finite = true;
  const auto g0 = runs.medians_input(Variant::kCrossEntropy, nullptr, &finite);
  const auto g2 = runs.medians_input(Variant::kForegroundAware, nullptr, &finite);
  const auto g5 = runs.medians_input(Variant::kGamma5, nullptr, &finite);
  return {finite && median(g2) >= median(g0),
          std::string(finite ? "all losses finite" : "non-finite loss") + "; median foreground mIoU gamma=0 " +
              fmt(median(g0)) + ", gamma=2 " + fmt(median(g2)) + ", gamma=5 " + fmt(median(g5))};
}

// 10. Tiling round trip and stitched evaluation
Outcome tiling_round_trip() {
  torch::manual_seed(10);
  std::vector<std::string> failures;
  for (auto [h, w, win, stride] : std::vector<std::array<int64_t, 4>>{{300, 500, 128, 96}, {896, 1408, 896, 512},
                                                                      {97, 64, 64, 64}, {64, 64, 64, 32}}) {
    auto field = torch::softmax(torch::randn({4, h, w}), 0);
    const auto grid = tile({h, w}, {win, win}, stride);
    std::vector<TileProbabilities> tiles;
    for (const auto& o : grid.origins)
      tiles.push_back({o, field.index({Slice(), Slice(o.y, o.y + win), Slice(o.x, o.x + win)})});
    if (!torch::equal(stitch(tiles, {h, w}), field))
      failures.push_back("stitch " + std::to_string(h) + "x" + std::to_string(w));
  }

  ModelConfig mcfg;
  mcfg.fpn_channels = 8;
  mcfg.embed_dim = 8;
  mcfg.decoder_channels = 8;
  mcfg.num_classes = 4;
  FarSeg model(mcfg);
  SynthConfig sc;
  sc.num_images = 4;
  sc.target_foreground_ratio = 0.1;
  auto data = synth_generate(sc).labeled();
  // an image smaller than the window: whole-image prediction runs on the padded raster
  cv::Mat small_image = data[0].image(cv::Rect(0, 0, 56, 40)).clone();
  cv::Mat small_mask = data[0].mask(cv::Rect(0, 0, 56, 40)).clone();
  data.push_back({"small", small_image, small_mask});

  const auto stitched = evaluate_dataset(model, data, 64, 32);
  ConfusionMatrix whole(4);
  model->eval();
  {
    torch::NoGradGuard no_grad;
    for (const auto& s : data) {
      const auto padded = pad_to_window(s.image, {64, 64});
      auto logits = model->forward(image_to_tensor(padded).unsqueeze(0));
      auto pred = logits.argmax(1).squeeze(0).index({Slice(0, s.image.rows), Slice(0, s.image.cols)});
      whole.accumulate(tensor_to_mask(pred), s.mask);
    }
  }
  const double a = stitched.confusion.mean_iou(), b = whole.mean_iou();
  if (!(stitched.confusion == whole)) failures.push_back("stitched confusion differs from whole-image");
  std::string detail = "4 fields exact; stitched mIoU " + fmt(a, 17) + " vs whole " + fmt(b, 17);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && a == b, detail};
}

// 11. mIoU oracle and reference arithmetic
Outcome miou_oracle() {
  ConfusionMatrix cm(2);
  cm.accumulate(std::vector<int64_t>{1, 0, 0, 0}, std::vector<int64_t>{1, 1, 0, 0});
  const auto iou = cm.iou_per_class();
  const bool hand = std::abs(*iou[1] - 0.5) < kIouTol && std::abs(*iou[0] - 2.0 / 3.0) < kIouTol &&
                    std::abs(cm.mean_iou() - 7.0 / 12.0) < kIouTol;

  const auto& fg = reference::kForegroundIou;
  const double sum = std::accumulate(fg.begin(), fg.end(), 0.0);
  const double fg_mean = sum / static_cast<double>(fg.size());
  const double background = (static_cast<double>(fg.size()) + 1) * reference::kReferenceMiou - sum;
  // the overall figure is a 16-class mean when the foreground-only mean misses it and the implied
  // background IoU is a valid IoU above every foreground class
  const bool inclusive = std::abs(fg_mean - reference::kReferenceMiou) > 1.0 && background <= 100.0 &&
                         background > *std::max_element(fg.begin(), fg.end());
  return {hand && inclusive, "IoU " + fmt(*iou[0], 17) + ", " + fmt(*iou[1], 17) + ", mean " +
                                 fmt(cm.mean_iou(), 17) + "; foreground-only mean " + fmt(fg_mean, 6) +
                                 " != " + fmt(reference::kReferenceMiou) + ", implied background IoU " +
                                 fmt(background, 6)};
}

// 12. Determinism
Outcome determinism() {
  configure_determinism(true);
  const auto cfg = ExperimentConfig::tiny_profile();
  std::vector<std::vector<double>> logs;
  for (int run = 0; run < 2; ++run) {
    auto data = load_data(cfg);
    Trainer trainer(cfg, data.train);
    std::vector<double> losses;
    for (int64_t i = 0; i < kDeterminismSteps; ++i) losses.push_back(trainer.train_step().loss);
    logs.push_back(std::move(losses));
  }
  int64_t mismatches = 0;
  for (int64_t i = 0; i < kDeterminismSteps; ++i) mismatches += logs[0][i] != logs[1][i];
  return {mismatches == 0, std::to_string(kDeterminismSteps) + " steps, " + std::to_string(mismatches) +
                               " mismatching losses, last " + fmt(logs[0].back(), 17)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  ImbalanceRuns runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss-sum preservation", sum_preservation},
      {"boundary identities", boundary_identities},
      {"annealing table", annealing_table},
      {"gradient check", gradient_check},
      {"end-to-end shapes", shape_suite},
      {"brute-force relation oracle", brute_force_relation},
      {"single-batch overfit", single_batch_overfit},
      {"imbalance benefit", [&] { return imbalance_benefit(runs); }},
      {"gamma sweep", [&] { return gamma_sweep(runs); }},
      {"tiling round trip", tiling_round_trip},
      {"mIoU oracle", miou_oracle},
      {"determinism", determinism},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << std::setw(2) << id << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
