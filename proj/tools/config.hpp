#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "amclip/flow.hpp"
#include "amclip/head.hpp"
#include "amclip/model.hpp"
#include "amclip/sampling.hpp"

namespace amclip::cli {

struct Paths {
  std::filesystem::path manifest;
  std::filesystem::path frames_root;  // defaults to the manifest's directory
  std::filesystem::path flow_cache;   // empty: compute flow on the fly
  std::filesystem::path checkpoint;
  std::filesystem::path output = ".";
  std::filesystem::path text_embeddings;
};

struct RunConfig {
  Scheme scheme = Scheme::Sparse;
  int classifiers = 4;
  int frames = 8;
  double theta = 0.5;
  Modality modality = Modality::RgbFlow;
  double flow_range = 4.0;
  BlockMatchConfig flow;
  EncoderConfig encoder;
  TrainConfig train;
  int checkpoint_every = 0;
  int workers = 1;
  bool log_wall_time = false;
  Paths paths;

  SamplingSetup sampling() const { return {scheme, classifiers, frames, modality, flow_range}; }
};

/// Parses a JSON config object; unknown keys and ill-typed values raise ConfigError.
/// Relative paths are resolved against `base`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace amclip::cli
