#include "amclip/head.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "amclip/errors.hpp"
#include "amclip/text_encoder.hpp"
#include "amclip/video_encoder.hpp"

namespace amclip {

using ag::Matrix;

namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

ScoreVector score(const Embedding& video, const Matrix& class_embeddings, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("score: tau must be positive");
  if (class_embeddings.cols() != video.size()) throw ArgumentError("score: embedding dimensions disagree");
  const double vn = video.norm();
  if (!(vn > 0.0)) throw NumericError("score: zero-norm video embedding");
  ScoreVector out(static_cast<std::size_t>(class_embeddings.rows()));
  for (Eigen::Index c = 0; c < class_embeddings.rows(); ++c) {
    const double cn = class_embeddings.row(c).norm();
    if (!(cn > 0.0)) throw NumericError("score: zero-norm class embedding " + std::to_string(c));
    const double cosine = class_embeddings.row(c).dot(video) / (vn * cn);
    out[static_cast<std::size_t>(c)] = logistic(cosine / tau);
  }
  return out;
}

ag::Var score(ag::Var video, ag::Var class_embeddings, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("score: tau must be positive");
  ag::Var v = ag::l2_normalize_rows(video);
  ag::Var c = ag::l2_normalize_rows(class_embeddings);
  return ag::sigmoid(ag::scale(ag::matmul(v, ag::transpose(c)), 1.0 / tau));
}

double bce_loss(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("bce_loss: length mismatch");
  if (scores.empty()) throw ArgumentError("bce_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kBceEpsilon, 1.0 - kBceEpsilon);
    total -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(scores.size());
}

std::vector<Neighbor> knn_infer(const Embedding& video, const Matrix& class_embeddings, int k) {
  if (k < 1) throw ArgumentError("knn_infer: K must be at least 1");
  if (k > class_embeddings.rows()) throw ArgumentError("knn_infer: K exceeds the class count");
  const double vn = video.norm();
  if (!(vn > 0.0)) throw NumericError("knn_infer: zero-norm video embedding");
  std::vector<Neighbor> all;
  for (Eigen::Index c = 0; c < class_embeddings.rows(); ++c) {
    const double cn = class_embeddings.row(c).norm();
    if (!(cn > 0.0)) throw NumericError("knn_infer: zero-norm class embedding");
    all.push_back({static_cast<int>(c), class_embeddings.row(c).dot(video) / (vn * cn)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer: " + std::string(name));
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || steps < 0 || batch_size < 1 || !(tau > 0.0)) {
    throw ConfigError("train config: learning rate >= 0, steps >= 0, batch size >= 1, tau > 0 required");
  }
}

ag::Var batch_loss(Graph& g, std::span<const TrainingExample> batch, double tau) {
  if (batch.empty()) throw ArgumentError("batch_loss: empty batch");
  std::vector<const TokenSequence*> seqs;
  for (const auto& ex : batch) seqs.push_back(&ex.tokens);
  ag::Var videos = encode_videos(g, seqs);
  ag::Var text = encode_class_texts(g);
  const auto classes = text.rows();
  std::vector<ag::Var> losses;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<Eigen::Index>(batch[b].labels.size()) != classes) {
      throw ArgumentError("batch_loss: label vector length does not match class count");
    }
    const int row[] = {static_cast<int>(b)};
    ag::Var video = ag::gather_rows(videos, row);
    ag::Var probs = score(video, align(g, text, video), tau);
    const Matrix targets = Eigen::Map<const Matrix>(batch[b].labels.data(), 1, classes);
    losses.push_back(ag::binary_cross_entropy(probs, targets, kBceEpsilon));
  }
  return ag::scale(ag::sum_all(ag::concat_rows(losses)), 1.0 / static_cast<double>(batch.size()));
}

LossAndGradients loss_and_gradients(const Model& model, std::span<const TrainingExample> batch, double tau) {
  Graph g(model);
  ag::Var loss = batch_loss(g, batch, tau);
  LossAndGradients out{loss.value()(0, 0), Gradients(model.params)};
  if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");
  g.tape().backward(loss);
  g.collect(out.gradients);
  return out;
}

double evaluate_loss(const Model& model, std::span<const TrainingExample> batch, double tau) {
  Graph g(model);
  return batch_loss(g, batch, tau).value()(0, 0);
}

double train_step(Model& model, std::span<const TrainingExample> batch, const TrainConfig& cfg,
                  OptimizerState* state) {
  cfg.validate();
  if (cfg.optimizer == Optimizer::Adam && state == nullptr) throw ArgumentError("train_step: Adam needs state");
  auto lg = loss_and_gradients(model, batch, cfg.tau);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    if (!lg.gradients.values[i].allFinite()) {
      throw NumericError("non-finite gradient for " + model.params.name(static_cast<int>(i)));
    }
  }
  if (cfg.learning_rate == 0.0) return lg.loss;

  if (cfg.optimizer == Optimizer::Sgd) {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      model.params.value(static_cast<int>(i)) -= cfg.learning_rate * lg.gradients.values[i];
    }
    return lg.loss;
  }

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state->first.values.size() != model.params.size()) {
    state->step = 0;
    state->first = Gradients(model.params);
    state->second = Gradients(model.params);
  }
  ++state->step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state->step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state->step));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& g = lg.gradients.values[i];
    auto& m = state->first.values[i];
    auto& v = state->second.values[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    model.params.value(static_cast<int>(i)).array() -=
        cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
  return lg.loss;
}

std::vector<StepLog> fit(Model& model, std::span<const PreparedClip> data, const SamplingSetup& sampling,
                         const TrainConfig& cfg, const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  if (data.empty()) throw ArgumentError("fit: no training clips");
  std::mt19937_64 rng(cfg.seed);
  OptimizerState state;
  std::vector<StepLog> log;
  log.reserve(static_cast<std::size_t>(cfg.steps));
  const auto t0 = std::chrono::steady_clock::now();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainingExample> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const PreparedClip& pc = data[rng() % data.size()];
      const int m = static_cast<int>(rng() % static_cast<std::uint64_t>(sampling.classifiers));
      const std::uint64_t plan_seed = rng();
      const auto plans =
          build_plans(pc.clip.frame_count(), sampling.classifiers, sampling.scheme, sampling.frames, plan_seed);
      batch.push_back({build_tokens(pc.clip, pc.flows, plans[static_cast<std::size_t>(m)].frame_indices,
                                    sampling.flow_range, sampling.modality),
                       pc.labels});
    }
    StepLog entry;
    entry.step = step;
    entry.loss = train_step(model, batch, cfg, &state);
    entry.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(entry);
    if (on_step) on_step(entry);
  }
  return log;
}

}  // namespace amclip
