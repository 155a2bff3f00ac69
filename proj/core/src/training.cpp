#include "avid/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

// Log terms are clamped at -100 and the backward pass stays finite when a
// probability saturates at 0 or 1.
torch::Tensor bce(const torch::Tensor& p, const torch::Tensor& target) { return torch::binary_cross_entropy(p, target); }

// Same objective on detector logits; training uses this form because
// float32 sigmoid saturates long before the logits do.
torch::Tensor bce_logits(const torch::Tensor& z, const torch::Tensor& target) {
  return torch::binary_cross_entropy_with_logits(z, target);
}

torch::Tensor squared_norm(const torch::Tensor& grid) { return grid.pow(2).sum({-2, -1}); }

void check_grids(const torch::Tensor& grid, const AdversarialTargets& targets) {
  if (!grid.defined() || grid.dim() < 2 || grid.sizes() != targets.ones.sizes()) {
    throw std::invalid_argument("score grid shape does not match the target grid");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Turns off parameter gradients of a module for the lifetime of the guard.
class FrozenParameters {
 public:
  explicit FrozenParameters(torch::nn::Module& module) : params_(module.parameters()) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~FrozenParameters() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

bool finite(double v) { return std::isfinite(v); }

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

const char* to_string(LossForm form) { return form == LossForm::literal ? "literal" : "per_cell_bce"; }

LossForm parse_loss_form(const std::string& text) {
  if (text == "literal") return LossForm::literal;
  if (text == "per_cell_bce") return LossForm::per_cell_bce;
  throw ConfigError("unknown loss form '" + text + "' (expected literal or per_cell_bce)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (!(reconstruction_weight >= 0.0)) throw ConfigError("reconstruction_weight must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

AdversarialTargets AdversarialTargets::like(const torch::Tensor& grid) {
  return {torch::ones_like(grid).detach()};
}

torch::Tensor detector_loss(const torch::Tensor& o_real, const torch::Tensor& o_fake,
                            const AdversarialTargets& targets, LossForm form) {
  check_grids(o_real, targets);
  check_grids(o_fake, targets);
  const auto& y = targets.ones;
  if (form == LossForm::literal) {
    return (-torch::log(squared_norm(o_real) + kLogEpsilon) - torch::log(squared_norm(y - o_fake) + kLogEpsilon)).mean();
  }
  return bce(o_real, y) + bce(o_fake, 1.0 - y);
}

torch::Tensor inpainter_loss(const torch::Tensor& o_fake, const AdversarialTargets& targets, LossForm form) {
  check_grids(o_fake, targets);
  const auto& y = targets.ones;
  if (form == LossForm::literal) return torch::log(squared_norm(y - o_fake) + kLogEpsilon).mean();
  return bce(o_fake, y);
}

MomentumSgd::MomentumSgd(std::vector<torch::Tensor> params, double learning_rate, double momentum)
    : params_(std::move(params)), learning_rate_(learning_rate), momentum_(momentum) {
  velocities_.reserve(params_.size());
  for (const auto& p : params_) velocities_.push_back(torch::zeros_like(p).detach());
}

void MomentumSgd::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void MomentumSgd::step() {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& v = velocities_[i];
    v.mul_(momentum_);
    if (params_[i].grad().defined()) v.add_(params_[i].grad(), -learning_rate_);
    params_[i].add_(v);
  }
}

TrainState::TrainState(Models m, const TrainConfig& cfg)
    : models(std::move(m)),
      detector_opt(models.detector->parameters(), cfg.learning_rate, cfg.momentum),
      inpainter_opt(models.inpainter->parameters(), cfg.learning_rate, cfg.momentum) {}

std::uint64_t noise_seed(std::uint64_t base_seed, long long step) {
  return splitmix64(base_seed ^ splitmix64(static_cast<std::uint64_t>(step)));
}

StepLosses train_step(TrainState& state, const torch::Tensor& batch, const TrainConfig& cfg) {
  if (!batch.defined() || batch.dim() != 4 || batch.size(0) == 0) throw std::invalid_argument("train_step needs a nonempty N x 3 x H x W batch");
  auto& inpainter = state.models.inpainter;
  auto& detector = state.models.detector;

  const auto noisy = inject_noise(batch, NoiseConfig{cfg.gamma, cfg.sigma, noise_seed(cfg.seed, state.step)});
  const auto fake_logits = inpainter->logits(noisy);
  const auto fake = torch::sigmoid(fake_logits);

  StepLosses losses;

  const bool logits = cfg.loss_form == LossForm::per_cell_bce;
  state.detector_opt.zero_grad();
  const auto z_real = detector->logits(batch);
  const auto z_fake = detector->logits(fake.detach());
  const auto targets = AdversarialTargets::like(z_real);
  const auto d_loss = logits ? bce_logits(z_real, targets.ones) + bce_logits(z_fake, 1.0 - targets.ones)
                             : detector_loss(torch::sigmoid(z_real), torch::sigmoid(z_fake), targets, cfg.loss_form);
  losses.detector = d_loss.item<double>();
  if (!finite(losses.detector)) throw TrainingError("non-finite detector loss", state.step);
  d_loss.backward();
  state.detector_opt.step();

  state.inpainter_opt.zero_grad();
  {
    FrozenParameters frozen(*detector);
    const auto z = detector->logits(fake);
    auto i_loss = logits ? bce_logits(z, targets.ones) : inpainter_loss(torch::sigmoid(z), targets, cfg.loss_form);
    // Cross-entropy on the logits keeps pulling saturated output pixels back,
    // where a squared error through the sigmoid would have no gradient left.
    if (cfg.reconstruction_weight > 0.0) {
      i_loss = i_loss + cfg.reconstruction_weight * torch::binary_cross_entropy_with_logits(fake_logits, batch);
    }
    losses.inpainter = i_loss.item<double>();
    if (!finite(losses.inpainter)) throw TrainingError("non-finite inpainter loss", state.step);
    i_loss.backward();
  }
  if (cfg.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(inpainter->parameters(), cfg.grad_clip);
  state.inpainter_opt.step();

  ++state.step;
  return losses;
}

ValidationMetrics validate(Models& models, const InputSet& validation, const TrainConfig& cfg) {
  if (validation.empty()) throw std::invalid_argument("validation set is empty");
  torch::NoGradGuard no_grad;
  double gap_sum = 0.0, recon_sum = 0.0;
  std::int64_t cells = 0;
  const auto n = validation.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
    std::vector<std::size_t> idx(std::min(bs, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto x = validation.batch(idx);
    const auto noisy = inject_noise(x, NoiseConfig{cfg.gamma, cfg.sigma, noise_seed(~cfg.seed, static_cast<long long>(b))});
    const auto real = models.detector->forward(x);
    const auto fake = models.detector->forward(models.inpainter->forward(noisy));
    gap_sum += (real - fake).sum().item<double>();
    cells += real.numel();
    recon_sum += (x - models.inpainter->forward(x)).pow(2).sum().item<double>();
  }
  return {gap_sum / static_cast<double>(cells), recon_sum / static_cast<double>(n)};
}

FitResult fit(Models& models, const InputSet& train, const InputSet& validation, const TrainConfig& cfg,
              const FitOptions& options) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (validation.empty()) throw std::invalid_argument("validation set is empty");

  TrainState state(models, cfg);
  FitResult result;
  result.initial = validate(models, validation, cfg);
  result.best_inpainter = snapshot(*models.inpainter);
  result.best_detector = snapshot(*models.detector);
  result.best_reconstruction = result.initial.reconstruction;
  result.best_gap = result.initial.gap;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::vector<std::pair<long long, ParameterSnapshot>> detector_points;
  double d_sum = 0.0, i_sum = 0.0;
  long long since_eval = 0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
  while (state.step < cfg.max_steps) {
    for (auto& i : idx) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      i = order[cursor++];
    }
    const auto losses = train_step(state, train.batch(idx), cfg);
    d_sum += losses.detector;
    i_sum += losses.inpainter;
    ++since_eval;

    if (state.step % cfg.eval_interval != 0) continue;
    const auto m = validate(models, validation, cfg);
    if (!finite(m.gap) || !finite(m.reconstruction)) throw TrainingError("non-finite validation metric", state.step);
    EvalRecord rec{state.step, d_sum / since_eval, i_sum / since_eval, m.gap, m.reconstruction};
    const bool first = result.history.empty();
    result.history.push_back(rec);
    d_sum = i_sum = 0.0;
    since_eval = 0;
    detector_points.emplace_back(state.step, snapshot(*models.detector));
    if (first || m.reconstruction < result.best_reconstruction) {
      result.best_reconstruction = m.reconstruction;
      result.best_inpainter = snapshot(*models.inpainter);
      result.best_inpainter_step = state.step;
    }
    if (options.log != nullptr) *options.log << format_eval_record(rec) << std::endl;
  }

  // The detector is judged against the inpainter it will be paired with,
  // and only snapshots trained at least as long as that inpainter count:
  // earlier ones learned to reject crude reconstructions, which separates
  // them from the paired inpainter's output without making them sensitive
  // to irregular content.
  if (!detector_points.empty()) {
    const auto current_inpainter = snapshot(*models.inpainter), current_detector = snapshot(*models.detector);
    restore(*models.inpainter, result.best_inpainter);
    bool found = false;
    for (auto& [step, params] : detector_points) {
      if (step < result.best_inpainter_step) continue;
      restore(*models.detector, params);
      const double gap = validate(models, validation, cfg).gap;
      if (!found || gap > result.best_gap) {
        found = true;
        result.best_gap = gap;
        result.best_detector_step = step;
        result.best_detector = params;
      }
    }
    restore(*models.inpainter, current_inpainter);
    restore(*models.detector, current_detector);
  }

  auto& last = result.last;
  last.kind = CheckpointKind::pair;
  last.arch = models.arch;
  last.step = state.step;
  last.rng_state = rng_state(rng);
  last.inpainter = snapshot(*models.inpainter);
  last.detector = snapshot(*models.detector);
  for (std::size_t i = 0; i < state.detector_opt.velocities().size(); ++i) {
    last.extra.emplace_back("detector_velocity/" + std::to_string(i), state.detector_opt.velocities()[i].clone());
  }
  for (std::size_t i = 0; i < state.inpainter_opt.velocities().size(); ++i) {
    last.extra.emplace_back("inpainter_velocity/" + std::to_string(i), state.inpainter_opt.velocities()[i].clone());
  }
  return result;
}

void write_fit_checkpoints(const FitResult& result, const ArchConfig& arch, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Checkpoint det;
  det.kind = CheckpointKind::detector;
  det.arch = arch;
  det.step = result.best_detector_step;
  det.rng_state = result.last.rng_state;
  det.detector = result.best_detector;
  save_checkpoint(dir / "detector_best.ckpt", det);

  Checkpoint inp;
  inp.kind = CheckpointKind::inpainter;
  inp.arch = arch;
  inp.step = result.best_inpainter_step;
  inp.rng_state = result.last.rng_state;
  inp.inpainter = result.best_inpainter;
  save_checkpoint(dir / "inpainter_best.ckpt", inp);

  save_checkpoint(dir / "last.ckpt", result.last);
}

std::string format_eval_record(const EvalRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "step=%lld detector_loss=%.6f inpainter_loss=%.6f val_gap=%.6f val_recon=%.6f", r.step,
                r.detector_loss, r.inpainter_loss, r.validation_gap, r.validation_reconstruction);
  return buf;
}

}  // namespace avid
