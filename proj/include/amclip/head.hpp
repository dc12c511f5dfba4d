#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "amclip/flow.hpp"
#include "amclip/model.hpp"
#include "amclip/sampling.hpp"

namespace amclip {

/// Per-class probabilities, ordered by the label vocabulary.
using ScoreVector = std::vector<double>;

/// p_c = sigmoid(cos(video, class_c) / tau). Throws NumericError on zero-norm inputs.
ScoreVector score(const Embedding& video, const ag::Matrix& class_embeddings, double tau);

/// Graph form: video (1×D), classes (C×D) -> probabilities (1×C).
ag::Var score(ag::Var video, ag::Var class_embeddings, double tau);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean over classes of -[y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> scores, std::span<const double> labels);

struct Neighbor {
  int class_index;
  double similarity;
};

/// Classes by descending cosine similarity (ties: lower index first), first K returned.
std::vector<Neighbor> knn_infer(const Embedding& video, const ag::Matrix& class_embeddings, int k);

enum class Optimizer { Sgd, Adam };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  Optimizer optimizer = Optimizer::Sgd;
  double learning_rate = 0.05;
  int steps = 1000;
  int batch_size = 8;
  double tau = 0.07;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingExample {
  TokenSequence tokens;
  std::vector<double> labels;
};

/// Mean BCE over the batch through video encoder, text encoder, alignment and scoring.
ag::Var batch_loss(Graph& g, std::span<const TrainingExample> batch, double tau);

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

LossAndGradients loss_and_gradients(const Model& model, std::span<const TrainingExample> batch, double tau);
double evaluate_loss(const Model& model, std::span<const TrainingExample> batch, double tau);

/// Moment buffers for the adaptive optimizer; unused by plain SGD.
struct OptimizerState {
  long step = 0;
  Gradients first;
  Gradients second;
};

/// One update (plain SGD by default). Returns the loss before the update; throws NumericError on a
/// non-finite loss or gradient. Adam needs `state`, which it initializes on first use.
double train_step(Model& model, std::span<const TrainingExample> batch, const TrainConfig& cfg,
                  OptimizerState* state = nullptr);

/// A clip prepared for training or inference: frames, consecutive flows, binary labels.
struct PreparedClip {
  VideoClip clip;
  std::vector<FlowField> flows;
  std::vector<double> labels;
};

struct SamplingSetup {
  Scheme scheme = Scheme::Sparse;
  int classifiers = 4;
  int frames = 8;
  Modality modality = Modality::RgbFlow;
  double flow_range = 4.0;
};

struct StepLog {
  int step = 0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

/// Training loop: each step draws `batch_size` clips and, for each, one classifier's sampling plan.
/// Sparse plans are re-seeded per draw. Deterministic for a fixed seed.
std::vector<StepLog> fit(Model& model, std::span<const PreparedClip> data, const SamplingSetup& sampling,
                         const TrainConfig& cfg, const std::function<void(const StepLog&)>& on_step = {});

}  // namespace amclip
