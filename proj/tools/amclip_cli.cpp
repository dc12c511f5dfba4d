// amclip: command-line entry point for flow preparation, planning, training, evaluation,
// prediction, toy data generation and plotting.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "amclip/ensemble.hpp"
#include "amclip/errors.hpp"
#include "amclip/metrics.hpp"
#include "amclip/synthetic.hpp"
#include "config.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace amclip;
using namespace amclip::cli;

namespace {

struct Dataset {
  std::vector<ClipRecord> records;
  fs::path frames_root;
};

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.paths.manifest.empty()) throw ConfigError("paths.manifest is required");
  Dataset d;
  d.records = load_manifest(cfg.paths.manifest);
  d.frames_root = cfg.paths.frames_root.empty() ? cfg.paths.manifest.parent_path() : cfg.paths.frames_root;
  return d;
}

FlowProvider flow_source(const RunConfig& cfg) {
  return cfg.paths.flow_cache.empty() ? block_matching_provider(cfg.flow) : cached_flow_provider(cfg.paths.flow_cache);
}

bool needs_flow(Modality m) { return m != Modality::Rgb; }

std::vector<PreparedClip> prepare(const RunConfig& cfg, const Dataset& d, const LabelVocabulary& classes) {
  const auto flows_of = flow_source(cfg);
  std::vector<PreparedClip> out;
  out.reserve(d.records.size());
  for (const auto& rec : d.records) {
    PreparedClip pc;
    pc.clip = load_clip(rec, d.frames_root);
    if (needs_flow(cfg.modality)) pc.flows = flows_of(pc.clip);
    pc.labels = classes.encode(rec.labels);
    out.push_back(std::move(pc));
  }
  return out;
}

Model load_model(const RunConfig& cfg) {
  if (cfg.paths.checkpoint.empty()) throw ConfigError("paths.checkpoint is required");
  return load_checkpoint(cfg.paths.checkpoint);
}

// Runs every classifier of the ensemble on every clip. Plan seeds are seed + clip position.
std::vector<Prediction> predict_all(const RunConfig& cfg, const Model& model, const Dataset& d) {
  const auto flows_of = flow_source(cfg);
  InferenceOptions opts;
  opts.tau = cfg.train.tau;
  opts.modality = cfg.modality;
  opts.flow_range = cfg.flow_range;
  opts.workers = cfg.workers;
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const VideoClip clip = load_clip(d.records[i], d.frames_root);
    const auto flows = needs_flow(cfg.modality) ? flows_of(clip) : std::vector<FlowField>{};
    const auto plans = build_plans(clip.frame_count(), cfg.classifiers, cfg.scheme, cfg.frames, cfg.train.seed + i);
    Prediction p;
    p.clip_id = clip.clip_id;
    p.per_classifier = run_classifiers(model, clip, flows, plans, opts);
    p.result = aggregate(p.per_classifier, cfg.theta);
    out.push_back(std::move(p));
  }
  return out;
}

// clip_id -> mean scores, read back from a predictions JSONL file.
std::map<std::string, std::vector<double>> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read predictions: " + path.string());
  std::map<std::string, std::vector<double>> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out[j.at("clip_id").get<std::string>()] = j.at("mean_scores").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError(static_cast<std::size_t>(n), std::string("predictions: ") + e.what());
    }
  }
  return out;
}

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ----- subcommands -------------------------------------------------------------------------

void cmd_prepare_flow(const RunConfig& cfg) {
  if (cfg.paths.flow_cache.empty()) throw ConfigError("paths.flow_cache is required");
  const Dataset d = load_dataset(cfg);
  fs::create_directories(cfg.paths.flow_cache);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(d.records.size());
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < d.records.size();) {
      try {
        const VideoClip clip = load_clip(d.records[i], d.frames_root);
        write_flow_cache(clip.clip_id, compute_clip_flows(clip, cfg.flow), cfg.paths.flow_cache);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < cfg.workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::cout << "wrote flow for " << d.records.size() << " clips to " << cfg.paths.flow_cache.string() << "\n";
}

void cmd_plan(const RunConfig& cfg, int n) {
  json out = json::array();
  for (const auto& p : build_plans(n, cfg.classifiers, cfg.scheme, cfg.frames, cfg.train.seed)) {
    json j;
    j["classifier"] = p.classifier_index;
    j["scheme"] = std::string(to_string(p.scheme));
    j["main_window"] = p.main_window ? json::array({p.main_window->start, p.main_window->end}) : json(nullptr);
    j["frames"] = p.frame_indices;
    out.push_back(j);
  }
  std::cout << out.dump(2) << "\n";
}

void cmd_train(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  const LabelVocabulary classes = LabelVocabulary::from_records(d.records);
  const auto data = prepare(cfg, d, classes);
  EncoderConfig enc = cfg.encoder;
  if (!data.empty()) {
    enc.image_height = data.front().clip.height();
    enc.image_width = data.front().clip.width();
    enc.validate();
  }
  Model model = Model::create(enc, classes, cfg.train.seed);
  if (!cfg.paths.text_embeddings.empty()) {
    model.external_text = load_external_text_embeddings(cfg.paths.text_embeddings, classes, enc.dim);
  }
  fs::create_directories(cfg.paths.output);
  const fs::path checkpoint =
      cfg.paths.checkpoint.empty() ? cfg.paths.output / "checkpoint.amck" : cfg.paths.checkpoint;
  std::ofstream csv(cfg.paths.output / "loss.csv");
  if (!csv) throw IngestionError("cannot write loss CSV in " + cfg.paths.output.string());
  csv << "step,loss,wall_ms\n";
  fit(model, data, cfg.sampling(), cfg.train, [&](const StepLog& e) {
    csv << e.step << ',' << num17(e.loss) << ',' << (cfg.log_wall_time ? e.wall_ms : 0.0) << '\n';
    if (cfg.checkpoint_every > 0 && (e.step + 1) % cfg.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_step%06d.amck", e.step + 1);
      save_checkpoint(model, cfg.paths.output / name);
    }
  });
  save_checkpoint(model, checkpoint);
  std::cout << "trained " << cfg.train.steps << " steps; checkpoint " << checkpoint.string() << "\n";
}

void cmd_predict(const RunConfig& cfg) {
  const Model model = load_model(cfg);
  const Dataset d = load_dataset(cfg);
  fs::create_directories(cfg.paths.output);
  std::ostringstream out;
  for (const auto& p : predict_all(cfg, model, d)) out << prediction_json(p, model.classes) << "\n";
  write_text(cfg.paths.output / "predictions.jsonl", out.str());
  std::cout << "wrote " << d.records.size() << " predictions\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& predictions_file) {
  const Dataset d = load_dataset(cfg);
  LabelVocabulary classes;
  std::map<std::string, std::vector<double>> by_clip;
  if (!predictions_file.empty()) {
    classes = LabelVocabulary::from_records(d.records);
    by_clip = read_predictions(predictions_file);
  } else {
    const Model model = load_model(cfg);
    classes = model.classes;
    for (auto& p : predict_all(cfg, model, d)) by_clip[p.clip_id] = p.result.mean;
  }
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> labels;
  for (const auto& rec : d.records) {
    const auto it = by_clip.find(rec.clip_id);
    if (it == by_clip.end()) throw ValidationError("no prediction for clip '" + rec.clip_id + "'");
    if (it->second.size() != classes.size()) throw ValidationError("score length mismatch for '" + rec.clip_id + "'");
    scores.push_back(it->second);
    const auto y = classes.encode(rec.labels);
    labels.emplace_back(y.begin(), y.end());
  }
  const auto report = evaluate(scores, labels, classes.classes());
  fs::create_directories(cfg.paths.output);
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  write_text(cfg.paths.output / "metrics.csv", csv.str());
  std::cout << csv.str();
}

void cmd_synth(const fs::path& out, int clips, int frames, std::uint64_t seed) {
  if (clips < 1 || frames < 2) throw ConfigError("synth: need at least 1 clip and 2 frames per clip");
  write_dataset(generate_moving_shapes(clips, frames, seed), out);
  std::cout << "wrote " << clips << " clips to " << out.string() << "\n";
}

void cmd_plot(const RunConfig& cfg, const fs::path& loss_csv, const fs::path& predictions_file) {
  if (loss_csv.empty() && predictions_file.empty()) throw ConfigError("plot: give --loss and/or --predictions");
  if (!loss_csv.empty()) {
    std::ifstream in(loss_csv);
    if (!in) throw IngestionError("cannot read " + loss_csv.string());
    Series s{"loss", {}, {}};
    std::string line;
    std::getline(in, line);
    int n = 1;
    while (std::getline(in, line)) {
      ++n;
      double step = 0, loss = 0;
      if (std::sscanf(line.c_str(), "%lf,%lf", &step, &loss) != 2) {
        throw ParseError(static_cast<std::size_t>(n), "loss CSV: malformed row");
      }
      s.x.push_back(step);
      s.y.push_back(loss);
    }
    write_text(cfg.paths.output / "loss.svg", line_chart_svg("Training loss", "step", "BCE loss", {s}));
  }
  if (!predictions_file.empty()) {
    const Dataset d = load_dataset(cfg);
    const auto classes = LabelVocabulary::from_records(d.records);
    const auto by_clip = read_predictions(predictions_file);
    std::vector<Series> curves;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& rec : d.records) {
        const auto it = by_clip.find(rec.clip_id);
        if (it == by_clip.end()) throw ValidationError("no prediction for clip '" + rec.clip_id + "'");
        scores.push_back(it->second.at(c));
        labels.push_back(static_cast<int>(classes.encode(rec.labels)[c]));
      }
      Series s{classes.name(c), {}, {}};
      try {
        for (const auto& pt : pr_curve(scores, labels)) {
          s.x.push_back(pt.recall);
          s.y.push_back(pt.precision);
        }
      } catch (const EvaluationError&) {
        continue;  // no positives: no curve
      }
      curves.push_back(std::move(s));
    }
    write_text(cfg.paths.output / "pr_curves.svg", line_chart_svg("Precision-recall", "recall", "precision", curves));
  }
  std::cout << "plots written to " << cfg.paths.output.string() << "\n";
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::Config: return 2;
    case Error::Kind::Data: return 3;
    case Error::Kind::Numeric: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amclip: motion-aware video/text classifier ensemble"};
  app.require_subcommand(1);

  std::string config_path;
  auto with_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", config_path, "JSON config file");
    if (required) opt->required();
  };

  auto* prepare_flow = app.add_subcommand("prepare-flow", "Compute and cache optical flow for every clip");
  with_config(prepare_flow, true);

  int plan_n = 0;
  auto* plan = app.add_subcommand("plan", "Print the sampling plans for a clip of N frames");
  with_config(plan, false);
  plan->add_option("-n,--frames-in-clip", plan_n, "Number of frames N")->required();
  std::string scheme_override;
  int m_override = 0, p_override = 0;
  plan->add_option("--scheme", scheme_override, "Override the config scheme");
  plan->add_option("--classifiers", m_override, "Override the classifier count M");
  plan->add_option("--frames", p_override, "Override the frame budget");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and a loss CSV");
  with_config(train, true);

  fs::path predictions_in;
  auto* eval = app.add_subcommand("eval", "Write the per-class AP / mAP report");
  with_config(eval, true);
  eval->add_option("--predictions", predictions_in, "Evaluate an existing predictions JSONL instead of a model");

  auto* predict = app.add_subcommand("predict", "Write ensemble predictions as JSON lines");
  with_config(predict, true);

  fs::path synth_out;
  int synth_clips = 30, synth_frames = 16;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate the moving-shapes toy dataset");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--clips", synth_clips, "Number of clips");
  synth->add_option("--frames", synth_frames, "Frames per clip");
  synth->add_option("--seed", synth_seed, "Random seed");

  fs::path plot_loss;
  auto* plot = app.add_subcommand("plot", "Render loss and precision-recall curves to SVG");
  with_config(plot, false);
  plot->add_option("--loss", plot_loss, "Loss CSV written by train");
  plot->add_option("--predictions", predictions_in, "Predictions JSONL (needs paths.manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? parse_config("{}") : load_config(config_path);
    if (*prepare_flow) cmd_prepare_flow(cfg);
    if (*plan) {
      if (!scheme_override.empty()) cfg.scheme = parse_scheme(scheme_override);
      if (m_override > 0) cfg.classifiers = m_override;
      if (p_override > 0) cfg.frames = p_override;
      cmd_plan(cfg, plan_n);
    }
    if (*train) cmd_train(cfg);
    if (*eval) cmd_eval(cfg, predictions_in);
    if (*predict) cmd_predict(cfg);
    if (*synth) cmd_synth(synth_out, synth_clips, synth_frames, synth_seed);
    if (*plot) cmd_plot(cfg, plot_loss, predictions_in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
