#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <torch/types.h>

#include "avid/checkpoint.hpp"
#include "avid/data.hpp"
#include "avid/models.hpp"

namespace avid {

enum class LossForm { literal, per_cell_bce };

const char* to_string(LossForm form);
LossForm parse_loss_form(const std::string& text);

/// Stabilizer inside each log of the literal objective.
inline constexpr double kLogEpsilon = 1e-8;

struct TrainConfig {
  double learning_rate = 0.002;
  double momentum = 0.9;
  int batch_size = 16;
  double gamma = 0.4;
  double sigma = 1.0;
  long long max_steps = 20000;
  long long eval_interval = 500;
  std::uint64_t seed = 0;
  LossForm loss_form = LossForm::per_cell_bce;
  // Weight of a per-pixel binary cross-entropy between I(X~) and X added to
  // the inpainter loss (0 = purely adversarial).
  double reconstruction_weight = 0.1;
  // Global L2 norm cap on the inpainter gradient before each update (0 = off).
  double grad_clip = 1.0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// The all-ones target grid Y.
struct AdversarialTargets {
  torch::Tensor ones;

  static AdversarialTargets like(const torch::Tensor& grid);
};

// Losses take score grids shaped [n1, n2] or [N, n1, n2]; batched grids are
// averaged over N. Both are differentiable.

/// Negated detector objective. literal:
///   -log(||o_real||^2 + eps) - log(||Y - o_fake||^2 + eps)
/// per_cell_bce: mean BCE with o_real -> 1 plus mean BCE with o_fake -> 0.
torch::Tensor detector_loss(const torch::Tensor& o_real, const torch::Tensor& o_fake,
                            const AdversarialTargets& targets, LossForm form);

/// literal: log(||Y - o_fake||^2 + eps); per_cell_bce: mean BCE with o_fake -> 1.
torch::Tensor inpainter_loss(const torch::Tensor& o_fake, const AdversarialTargets& targets,
                             LossForm form);

/// v <- momentum * v - lr * grad; theta <- theta + v.
class MomentumSgd {
 public:
  MomentumSgd(std::vector<torch::Tensor> params, double learning_rate, double momentum);

  void zero_grad();
  void step();

  const std::vector<torch::Tensor>& velocities() const { return velocities_; }
  std::vector<torch::Tensor>& velocities() { return velocities_; }

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> velocities_;
  double learning_rate_;
  double momentum_;
};

struct TrainState {
  Models models;
  MomentumSgd detector_opt;
  MomentumSgd inpainter_opt;
  long long step = 0;

  TrainState(Models m, const TrainConfig& cfg);
};

struct StepLosses {
  double detector = 0.0;
  double inpainter = 0.0;
};

/// Seed of the noise drawn at `step` (fresh noise every batch).
std::uint64_t noise_seed(std::uint64_t base_seed, long long step);

/// One alternating update on `batch` (N x 3 x H x W): detector first on
/// (X, I(X~)) with I fixed, then the inpainter on D(I(X~)) with D fixed.
/// Throws TrainingError on a non-finite loss.
StepLosses train_step(TrainState& state, const torch::Tensor& batch, const TrainConfig& cfg);

struct EvalRecord {
  long long step = 0;
  double detector_loss = 0.0;          // mean over the interval
  double inpainter_loss = 0.0;         // mean over the interval
  double validation_gap = 0.0;         // mean D(X) - mean D(I(X~))
  double validation_reconstruction = 0.0;  // mean ||X - I(X)||^2
};

struct ValidationMetrics {
  double gap = 0.0;
  double reconstruction = 0.0;
};

ValidationMetrics validate(Models& models, const InputSet& validation, const TrainConfig& cfg);

struct FitResult {
  ParameterSnapshot best_inpainter;
  ParameterSnapshot best_detector;
  long long best_inpainter_step = 0;
  long long best_detector_step = 0;
  double best_reconstruction = 0.0;
  double best_gap = 0.0;  // measured with best_inpainter
  ValidationMetrics initial;
  std::vector<EvalRecord> history;
  Checkpoint last;
};

struct FitOptions {
  std::ostream* log = nullptr;  // one line per evaluation when set
};

/// Trains `models` in place for cfg.max_steps, evaluating on `validation`
/// every cfg.eval_interval steps. The inpainter keeps the evaluation point
/// with the smallest validation reconstruction error; the detector keeps,
/// among evaluation points no earlier than that one, the snapshot with the
/// largest validation gap against the best inpainter. With no evaluation
/// points the initial parameters are returned.
FitResult fit(Models& models, const InputSet& train, const InputSet& validation,
              const TrainConfig& cfg, const FitOptions& options = {});

/// Writes detector_best.ckpt, inpainter_best.ckpt and last.ckpt into `dir`.
void write_fit_checkpoints(const FitResult& result, const ArchConfig& arch,
                           const std::filesystem::path& dir);

std::string format_eval_record(const EvalRecord& record);

}  // namespace avid
