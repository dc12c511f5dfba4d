#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "amclip/head.hpp"

namespace amclip {

struct InferenceOptions {
  double tau = 0.07;
  Modality modality = Modality::RgbFlow;
  double flow_range = 4.0;
  /// Worker threads for per-plan runs; results do not depend on this.
  int workers = 1;
};

/// Score vector of every plan, in plan order, all computed with the same parameters.
std::vector<ScoreVector> run_classifiers(const Model& model, const VideoClip& clip, std::span<const FlowField> flows,
                                         std::span<const SamplingPlan> plans, const InferenceOptions& opts);

/// Score vector of a single classifier over an already built token sequence.
ScoreVector classify(const Model& model, const TokenSequence& tokens, double tau);

struct Aggregate {
  ScoreVector mean;
  std::vector<int> predicted;  // class indices with mean >= theta, ascending
};

Aggregate aggregate(std::span<const ScoreVector> scores, double theta);

struct Prediction {
  std::string clip_id;
  Aggregate result;
  std::vector<ScoreVector> per_classifier;
};

/// One JSON line: {clip_id, mean_scores, predicted: [names], per_classifier}.
std::string prediction_json(const Prediction& p, const LabelVocabulary& classes);

}  // namespace amclip
