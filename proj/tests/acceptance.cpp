// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "amclip/ensemble.hpp"
#include "amclip/errors.hpp"
#include "amclip/metrics.hpp"
#include "amclip/sampling.hpp"
#include "amclip/video_encoder.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "toy_experiment.hpp"

using namespace amclip;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;

void run(const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    o.require(false, "over time budget");
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-34s %7.1fs  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
}

// ----- sampling ----------------------------------------------------------------------------

std::vector<Window> quasi_equal(int n, int parts) {
  std::vector<Window> out;
  int start = 0;
  for (int i = 0; i < parts; ++i) {
    const int len = n / parts + (i < n % parts ? 1 : 0);
    out.push_back({start, start + len});
    start += len;
  }
  return out;
}

bool increasing_in_range(const std::vector<int>& v, int n) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0 || v[i] >= n || (i > 0 && v[i] <= v[i - 1])) return false;
  }
  return true;
}

Outcome sampling_suite() {
  Outcome o;
  std::mt19937_64 rng(20240901);
  int feasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 128);
    const int m = 1 + static_cast<int>(rng() % std::min(n, 12));
    const int p = 1 + static_cast<int>(rng() % 16);
    const std::uint64_t seed = rng();
    const std::string where = " (N=" + std::to_string(n) + " M=" + std::to_string(m) + " P=" + std::to_string(p) + ")";

    const auto windows = partition_main_windows(n, m);
    o.require(windows == quasi_equal(n, m), "partition not contiguous/disjoint/quasi-equal" + where);

    for (Scheme s : {Scheme::Dense, Scheme::SemiDense, Scheme::Sparse}) {
      std::vector<SamplingPlan> plans;
      try {
        plans = build_plans(n, m, s, p, seed);
      } catch (const InfeasiblePlanError&) {
        bool expected = p > n;
        if (s == Scheme::Dense) expected = p > windows.back().length();
        if (s == Scheme::SemiDense) {
          for (const auto& w : windows) expected |= (p + 1) / 2 > w.length() || p / 2 > n - w.length();
        }
        o.require(expected, std::string("unexpected infeasible plan, ") + std::string(to_string(s)) + where);
        continue;
      }
      ++feasible;
      o.require(build_plans(n, m, s, p, seed).size() == plans.size(), "plan count");
      o.require(plans.size() == static_cast<std::size_t>(m), "plan count" + where);
      for (std::size_t k = 0; k < plans.size(); ++k) {
        const auto& idx = plans[k].frame_indices;
        const Window w = windows[k];
        o.require(static_cast<int>(idx.size()) == p, "frame budget" + where);
        o.require(increasing_in_range(idx, n), "indices not increasing/in range" + where);
        o.require(idx == build_plans(n, m, s, p, seed)[k].frame_indices, "non-deterministic" + where);
        if (s == Scheme::Dense) {
          for (int i : idx) o.require(w.contains(i), "dense index outside main window" + where);
        } else if (s == Scheme::SemiDense) {
          int inside = 0;
          for (int i : idx) inside += w.contains(i);
          o.require(inside == (p + 1) / 2 && static_cast<int>(idx.size()) - inside == p / 2,
                    "semi-dense split" + where);
        } else {
          const auto strata = quasi_equal(n, p);
          for (std::size_t j = 0; j < strata.size(); ++j) {
            o.require(strata[j].contains(idx[j]), "sparse stratum" + where);
          }
        }
      }
    }
  }
  o.detail = o.pass ? std::to_string(feasible) + " feasible plans checked over 1000 configurations" : o.detail;
  return o;
}

// ----- flow ----------------------------------------------------------------------------------

Outcome flow_oracle() {
  Outcome o;
  std::mt19937_64 rng(77);
  for (int i = 0; i < 10; ++i) {
    const Image img = test::random_image(32, 32, rng);
    for (float v : compute_flow(img, img).data) o.require(v == 0.0f, "identical frames gave non-zero flow");
  }
  double worst = 0.0, worst_oracle = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int dx = static_cast<int>(rng() % 7) - 3;
    const int dy = static_cast<int>(rng() % 7) - 3;
    auto [a, b] = oracle::shifted_pair(64, 64, dx, dy, rng);
    const FlowField f = compute_flow(a, b);
    const FlowField ref = oracle::exhaustive_block_matching(a, b, 8, 4);
    const double err = oracle::interior_error(f, dx, dy, 8);
    const double ref_err = oracle::interior_error(ref, dx, dy, 8);
    worst = std::max(worst, err);
    worst_oracle = std::max(worst_oracle, ref_err);
    o.require(err <= 0.5, "shift (" + std::to_string(dx) + "," + std::to_string(dy) + ") error " + std::to_string(err));
    o.require(ref_err <= 0.5, "oracle disagrees with the planted shift");
    o.require(oracle::interior_difference(f, ref, 8) <= 0.5, "pyramid and exhaustive oracle disagree");
  }
  if (o.pass) {
    std::ostringstream s;
    s << "50 shifts, worst interior error " << worst << " px (oracle " << worst_oracle << ")";
    o.detail = s.str();
  }
  return o;
}

// ----- metrics -------------------------------------------------------------------------------

Outcome map_oracle() {
  Outcome o;
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int done = 0;
  while (done < 1000) {
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<double> scores(k);
    std::vector<int> labels(k);
    int positives = 0;
    for (int i = 0; i < k; ++i) {
      // Coarse scores so ties are common.
      scores[i] = static_cast<double>(rng() % 5) / 4.0;
      labels[i] = static_cast<int>(rng() % 2);
      positives += labels[i];
    }
    if (positives == 0) continue;
    ++done;
    const double ap = average_precision(scores, labels);
    const double ref = oracle::brute_force_ap(scores, labels);
    worst = std::max(worst, std::abs(ap - ref));
    o.require(std::abs(ap - ref) <= 1e-12, "AP differs from the brute-force oracle");

    std::vector<double> transformed(k), perfect(k);
    for (int i = 0; i < k; ++i) {
      transformed[i] = std::exp(3.0 * scores[i]) - 7.0;
      perfect[i] = labels[i] ? 1.0 + i : -1.0 - i;
    }
    o.require(average_precision(transformed, labels) == ap, "AP changed under a monotone transform");
    o.require(average_precision(perfect, labels) == 1.0, "perfect ranking did not give AP 1");
  }
  if (o.pass) {
    std::ostringstream s;
    s << "1000 instances, max |AP - oracle| = " << worst;
    o.detail = s.str();
  }
  return o;
}

// ----- gradients -----------------------------------------------------------------------------

Outcome gradient_check() {
  Outcome o;
  const auto checks = test::check_gradients(test::gradcheck_model(31), test::gradcheck_batch(32), 0.07, 1e-5, 0);
  double worst = 0.0;
  std::string worst_name;
  std::size_t entries = 0;
  int zero_groups = 0;
  for (const auto& c : checks) {
    entries += c.entries;
    zero_groups += std::max(c.analytic_norm, c.numeric_norm) < test::kGradientFloor;
    if (c.rel_error > worst) {
      worst = c.rel_error;
      worst_name = c.name;
    }
    o.require(c.rel_error <= 1e-4, c.name + " relative error " + std::to_string(c.rel_error));
  }
  if (o.pass) {
    std::ostringstream s;
    s << checks.size() << " groups (" << zero_groups << " structurally zero), " << entries << " entries, worst "
      << worst << " (" << worst_name << ")";
    o.detail = s.str();
  }
  return o;
}

// ----- permutation ---------------------------------------------------------------------------

Model perturbed_model(bool positions, std::uint64_t seed) {
  Model m = test::gradcheck_model(seed);
  EncoderConfig cfg = m.config;
  cfg.temporal_positions = positions;
  Model out = Model::create(cfg, m.classes, seed);
  out.params = m.params;
  return out;
}

TokenSequence random_tokens(int len, std::mt19937_64& rng) {
  TokenSequence seq;
  for (int t = 0; t < len; ++t) {
    seq.tokens.push_back({t % 2 == 0 ? TokenKind::Frame : TokenKind::Flow, test::random_image(8, 8, rng), t / 2});
  }
  return seq;
}

Outcome permutation_property() {
  Outcome o;
  std::mt19937_64 rng(5);
  const Model invariant = perturbed_model(false, 41);
  const Model ordered = perturbed_model(true, 41);
  double worst = 0.0, closest = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = random_tokens(2 + static_cast<int>(rng() % 8), rng);
    std::vector<Token> shuffled = seq.tokens;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Embedding a = embed_video(invariant, seq);
    const Embedding b = embed_video(invariant, TokenSequence{shuffled});
    const double rel = (a - b).norm() / a.norm();
    worst = std::max(worst, rel);
    o.require(rel <= 1e-9, "embedding changed under slot permutation without positions");

    TokenSequence rev;
    rev.tokens.assign(seq.tokens.rbegin(), seq.tokens.rend());
    const Embedding c = embed_video(ordered, seq);
    const Embedding d = embed_video(ordered, rev);
    const double cosine = c.dot(d) / (c.norm() * d.norm());
    closest = std::min(closest, 1.0 - cosine);
    o.require(cosine < 1.0 - 1e-9, "reversal did not change the embedding with positions");
  }
  if (o.pass) {
    std::ostringstream s;
    s << "max permuted rel diff " << worst << ", min reversal 1-cos " << closest;
    o.detail = s.str();
  }
  return o;
}

// ----- modality comparison -------------------------------------------------------------------

Outcome modality_comparison() {
  Outcome o;
  test::ToySetup s;
  s.optimizer = Optimizer::Adam;
  s.learning_rate = 1e-3;
  s.flow_range = 2.0;
  s.steps = 3000;
  const auto data = test::make_toy_data(s);
  const auto both = test::run_toy(data, s, Modality::RgbFlow);
  const auto rgb = test::run_toy(data, s, Modality::Rgb);
  const double both_map = both.report.summary.value;
  const double rgb_direction = test::subset_map(rgb.report, {"move left", "move right"});
  o.require(both_map >= 0.95, "RGB+flow test mAP below 0.95");
  o.require(rgb_direction <= 0.75, "RGB-only separated the direction pair");
  std::ostringstream d;
  d << "RGB+flow mAP " << both_map << " (direction pair "
    << test::subset_map(both.report, {"move left", "move right"}) << "); RGB-only mAP " << rgb.report.summary.value
    << ", direction pair " << rgb_direction;
  o.detail = o.pass ? d.str() : o.detail + "; " + d.str();
  return o;
}

// ----- ensemble ------------------------------------------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Train briefly, checkpoint, reload and predict the test clips. Returns checkpoint bytes + predictions.
std::string end_to_end(const std::filesystem::path& dir, const std::string& tag) {
  test::ToySetup s;
  s.train_clips = 12;
  s.test_clips = 6;
  s.frames_per_clip = 8;
  s.dim = 16;
  const auto data = test::make_toy_data(s);
  EncoderConfig cfg;
  cfg.dim = s.dim;
  cfg.heads = 2;
  Model model = Model::create(cfg, data.classes, 9);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch_size = 4;
  tc.seed = 9;
  SamplingSetup sampling;
  sampling.classifiers = 2;
  sampling.frames = 4;
  std::ostringstream out;
  for (const auto& e : fit(model, data.train, sampling, tc)) out << e.step << ',' << e.loss << '\n';
  const auto ckpt = dir / (tag + ".amck");
  save_checkpoint(model, ckpt);
  const Model loaded = load_checkpoint(ckpt);
  InferenceOptions opts;
  opts.workers = 3;
  for (const auto& pc : data.test) {
    const auto plans = build_plans(pc.clip.frame_count(), 2, Scheme::Sparse, 4, 17);
    Prediction p;
    p.clip_id = pc.clip.clip_id;
    p.per_classifier = run_classifiers(loaded, pc.clip, pc.flows, plans, opts);
    p.result = aggregate(p.per_classifier, 0.5);
    out << prediction_json(p, loaded.classes) << '\n';
  }
  return file_bytes(ckpt) + out.str();
}

Outcome ensemble_contracts() {
  Outcome o;
  const Model m = test::gradcheck_model(51);
  std::mt19937_64 rng(52);
  VideoClip clip;
  for (int i = 0; i < 12; ++i) clip.frames.push_back(test::random_image(8, 8, rng));
  const auto flows = compute_clip_flows(clip, {1, 4, 2});

  SamplingPlan plan;
  plan.frame_indices = {1, 4, 8, 11};
  const std::vector<SamplingPlan> same(4, plan);
  const auto repeated = run_classifiers(m, clip, flows, same, {});
  for (const auto& v : repeated) o.require(v == repeated.front(), "identical plans gave different scores");

  const auto plans = build_plans(12, 3, Scheme::SemiDense, 4, 0);
  const auto scores = run_classifiers(m, clip, flows, plans, {});
  const auto agg = aggregate(scores, 0.5);
  for (std::size_t c = 0; c < agg.mean.size(); ++c) {
    const double mean = (scores[0][c] + scores[1][c] + scores[2][c]) / 3.0;
    o.require(std::abs(agg.mean[c] - mean) <= 1e-15, "aggregate is not the elementwise mean");
  }
  std::vector<int> previous = aggregate(scores, 0.0).predicted;
  for (double theta = 0.0; theta <= 1.0; theta += 0.01) {
    const auto now = aggregate(scores, theta).predicted;
    for (int c : now) {
      o.require(std::find(previous.begin(), previous.end(), c) != previous.end(), "predicted set grew with theta");
    }
    previous = now;
  }

  const auto dir = test::temp_dir("acceptance_e2e");
  const std::string first = end_to_end(dir, "a");
  const std::string second = end_to_end(dir, "b");
  o.require(first == second, "end-to-end run is not bit-reproducible");
  if (o.pass) o.detail = "end-to-end output " + std::to_string(first.size()) + " bytes identical across runs";
  return o;
}

}  // namespace

int main() {
  std::printf(
      "PASS  %-34s %7.1fs  %s\n", "absolute-values-not-reproducible", 0.0,
      "stated: the published mAP figures (74.63 overall; 68 / 68.49 / 73.93 by sampling scheme; "
      "73.93 / 65.1 / 74.63 by modality) need pretrained CLIP weights, RAFT flow and the full Animal Kingdom "
      "dataset, so they are not reproducible at desk scale; the checks below are property-based substitutes");
  run("sampling-invariants", 10, sampling_suite);
  run("flow-oracle", 60, flow_oracle);
  run("map-oracle", 10, map_oracle);
  run("gradient-check", 300, gradient_check);
  run("permutation-property", 0, permutation_property);
  run("modality-ordering", 900, modality_comparison);
  run("ensemble-contracts", 0, ensemble_contracts);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
