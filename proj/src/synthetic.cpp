#include "amclip/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "amclip/errors.hpp"

namespace amclip {

namespace fs = std::filesystem;

namespace {

constexpr int kBackground = 51;
constexpr double kDimFactor = 0.35;
constexpr int kBlinkPeriod = 3;

// Fixed square texture shared by every clip, as 8-bit levels.
std::vector<int> square_texture(int side) {
  std::mt19937 rng(12345);
  std::uniform_int_distribution<int> level(115, 255);
  std::vector<int> tex(static_cast<std::size_t>(side) * side * 3);
  for (auto& v : tex) v = level(rng);
  return tex;
}

Image render_frame(const std::vector<int>& tex, int side, int x, int y, bool dim, const SyntheticOptions& o) {
  Image img(o.height, o.width, kBackground / 255.0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int px = ((x + c) % o.width + o.width) % o.width;
      const int py = y + r;
      if (py < 0 || py >= o.height) continue;
      for (int ch = 0; ch < 3; ++ch) {
        int v = tex[(static_cast<std::size_t>(r) * side + c) * 3 + ch];
        if (dim) v = static_cast<int>(std::lround(v * kDimFactor));
        img.at(py, px, ch) = v / 255.0;
      }
    }
  }
  return img;
}

}  // namespace

std::vector<std::string> synthetic_class_names() { return {"blinking", "keeping still", "move left", "move right"}; }

VideoClip render_shape_clip(const ShapeClipSpec& spec, int frames, const SyntheticOptions& opts) {
  if (frames < 2 || opts.square < 1 || opts.square > opts.height || opts.square > opts.width) {
    throw ArgumentError("render_shape_clip: invalid sizes");
  }
  const auto tex = square_texture(opts.square);
  VideoClip clip;
  clip.frames.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const int x = spec.motion == Motion::Still ? spec.x0 : spec.x0 + t;
    const bool dim = spec.blinking && (spec.blink_phase + t) % kBlinkPeriod == kBlinkPeriod - 1;
    clip.frames.push_back(render_frame(tex, opts.square, x, spec.y0, dim, opts));
  }
  if (spec.motion == Motion::Left) std::reverse(clip.frames.begin(), clip.frames.end());
  return clip;
}

SyntheticDataset generate_moving_shapes(int n_clips, int frames_per_clip, std::uint64_t seed,
                                        const SyntheticOptions& opts, const std::string& id_prefix) {
  if (n_clips < 0 || frames_per_clip < 2) throw ArgumentError("generate_moving_shapes: invalid sizes");
  std::mt19937_64 rng(seed);
  SyntheticDataset data;
  for (int i = 0; i < n_clips; ++i) {
    ShapeClipSpec spec;
    spec.motion = static_cast<Motion>(i % 3);
    spec.x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(opts.width));
    spec.y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(opts.height - opts.square + 1));
    spec.blinking = (rng() & 1u) != 0;
    spec.blink_phase = static_cast<int>(rng() % kBlinkPeriod);

    std::ostringstream id;
    id << id_prefix << '_' << std::setw(5) << std::setfill('0') << i;
    VideoClip clip = render_shape_clip(spec, frames_per_clip, opts);
    clip.clip_id = id.str();

    ClipRecord rec;
    rec.clip_id = clip.clip_id;
    rec.frame_source = "frames/" + clip.clip_id;
    rec.frame_count = frames_per_clip;
    switch (spec.motion) {
      case Motion::Left:
        rec.labels.push_back("move left");
        break;
      case Motion::Right:
        rec.labels.push_back("move right");
        break;
      case Motion::Still:
        rec.labels.push_back("keeping still");
        break;
    }
    if (spec.blinking) rec.labels.push_back("blinking");

    data.records.push_back(std::move(rec));
    data.clips.push_back(std::move(clip));
    data.specs.push_back(spec);
  }
  return data;
}

void write_dataset(const SyntheticDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const fs::path frames = dir / data.records[i].frame_source;
    fs::create_directories(frames);
    const auto& clip = data.clips[i];
    for (int t = 0; t < clip.frame_count(); ++t) write_image(frames / frame_file_name(t), clip.frames[t]);
  }
  save_manifest(dir / "manifest.jsonl", data.records);
}

}  // namespace amclip
