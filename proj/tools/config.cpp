#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amclip/errors.hpp"

namespace amclip::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key: " + where + key);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
  std::string s;
  read(obj, key, s);
  if (s.empty()) return;
  std::filesystem::path p(s);
  out = p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"scheme", "classifiers", "frames", "patch", "dim", "heads", "frame_layers", "temporal_layers",
                  "text_layers", "max_text_len", "temporal_positions", "image_size", "theta", "tau", "seed",
                  "optimizer", "learning_rate", "steps", "batch_size", "checkpoint_every", "modality",
                  "flow_range", "flow", "workers", "log_wall_time", "paths"},
                 "");

  RunConfig c;
  std::string s;
  if (j.contains("scheme")) {
    read(j, "scheme", s);
    try {
      c.scheme = parse_scheme(s);
    } catch (const Error&) {
      throw ConfigError("unknown sampling scheme: " + s);
    }
  }
  read(j, "classifiers", c.classifiers);
  read(j, "frames", c.frames);
  read(j, "patch", c.encoder.patch);
  read(j, "dim", c.encoder.dim);
  read(j, "heads", c.encoder.heads);
  read(j, "frame_layers", c.encoder.frame_layers);
  read(j, "temporal_layers", c.encoder.temporal_layers);
  read(j, "text_layers", c.encoder.text_layers);
  read(j, "max_text_len", c.encoder.max_text_len);
  read(j, "temporal_positions", c.encoder.temporal_positions);
  if (j.contains("image_size")) {
    std::vector<int> hw;
    read(j, "image_size", hw);
    if (hw.size() != 2) throw ConfigError("image_size must be [height, width]");
    c.encoder.image_height = hw[0];
    c.encoder.image_width = hw[1];
  }
  read(j, "theta", c.theta);
  read(j, "tau", c.train.tau);
  read(j, "seed", c.train.seed);
  if (j.contains("optimizer")) {
    read(j, "optimizer", s);
    c.train.optimizer = parse_optimizer(s);
  }
  read(j, "learning_rate", c.train.learning_rate);
  read(j, "steps", c.train.steps);
  read(j, "batch_size", c.train.batch_size);
  read(j, "checkpoint_every", c.checkpoint_every);
  if (j.contains("modality")) {
    read(j, "modality", s);
    try {
      c.modality = parse_modality(s);
    } catch (const Error&) {
      throw ConfigError("unknown modality: " + s);
    }
  }
  read(j, "flow_range", c.flow_range);
  if (j.contains("flow")) {
    const json& f = j.at("flow");
    if (!f.is_object()) throw ConfigError("'flow' must be an object");
    reject_unknown(f, {"levels", "block", "radius"}, "flow.");
    read(f, "levels", c.flow.levels);
    read(f, "block", c.flow.block);
    read(f, "radius", c.flow.radius);
  }
  read(j, "workers", c.workers);
  read(j, "log_wall_time", c.log_wall_time);
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    if (!p.is_object()) throw ConfigError("'paths' must be an object");
    reject_unknown(p, {"manifest", "frames_root", "flow_cache", "checkpoint", "output", "text_embeddings"}, "paths.");
    read_path(p, "manifest", c.paths.manifest, base);
    read_path(p, "frames_root", c.paths.frames_root, base);
    read_path(p, "flow_cache", c.paths.flow_cache, base);
    read_path(p, "checkpoint", c.paths.checkpoint, base);
    read_path(p, "output", c.paths.output, base);
    read_path(p, "text_embeddings", c.paths.text_embeddings, base);
  }

  if (c.classifiers < 1) throw ConfigError("classifiers must be at least 1");
  if (c.frames < 1) throw ConfigError("frames must be at least 1");
  if (!(c.theta >= 0.0 && c.theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
  if (!(c.flow_range > 0.0)) throw ConfigError("flow_range must be positive");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  c.encoder.validate();
  c.train.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace amclip::cli
