#include "amclip/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <nlohmann/json.hpp>

#include "amclip/errors.hpp"
#include "amclip/text_encoder.hpp"
#include "amclip/video_encoder.hpp"

namespace amclip {

ScoreVector classify(const Model& model, const TokenSequence& tokens, double tau) {
  Graph g(model);
  ag::Var video = encode_video(g, tokens);
  ag::Var probs = score(video, align(g, encode_class_texts(g), video), tau);
  const auto& p = probs.value();
  return ScoreVector(p.data(), p.data() + p.size());
}

std::vector<ScoreVector> run_classifiers(const Model& model, const VideoClip& clip, std::span<const FlowField> flows,
                                         std::span<const SamplingPlan> plans, const InferenceOptions& opts) {
  std::vector<ScoreVector> out(plans.size());
  auto run_one = [&](std::size_t m) {
    const auto tokens = build_tokens(clip, flows, plans[m].frame_indices, opts.flow_range, opts.modality);
    out[m] = classify(model, tokens, opts.tau);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, opts.workers));
  if (workers == 1 || plans.size() < 2) {
    for (std::size_t m = 0; m < plans.size(); ++m) run_one(m);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(plans.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, plans.size()); ++w) {
    pool.emplace_back([&] {
      for (std::size_t m; (m = next.fetch_add(1)) < plans.size();) {
        try {
          run_one(m);
        } catch (...) {
          errors[m] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Aggregate aggregate(std::span<const ScoreVector> scores, double theta) {
  if (scores.empty()) throw ArgumentError("aggregate: no score vectors");
  const std::size_t c = scores.front().size();
  Aggregate a;
  a.mean.assign(c, 0.0);
  for (const auto& s : scores) {
    if (s.size() != c) throw ArgumentError("aggregate: score vectors differ in length");
    for (std::size_t i = 0; i < c; ++i) a.mean[i] += s[i];
  }
  for (std::size_t i = 0; i < c; ++i) {
    a.mean[i] /= static_cast<double>(scores.size());
    if (a.mean[i] >= theta) a.predicted.push_back(static_cast<int>(i));
  }
  return a;
}

std::string prediction_json(const Prediction& p, const LabelVocabulary& classes) {
  nlohmann::json j;
  j["clip_id"] = p.clip_id;
  j["mean_scores"] = p.result.mean;
  std::vector<std::string> names;
  for (int i : p.result.predicted) names.push_back(classes.name(static_cast<std::size_t>(i)));
  j["predicted"] = names;
  j["per_classifier"] = p.per_classifier;
  return j.dump();
}

}  // namespace amclip
