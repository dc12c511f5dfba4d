#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amclip/corpus.hpp"

namespace amclip {

enum class Motion { Left, Right, Still };

/// Parameters of one synthetic clip. Left clips are time-reversed right-moving trajectories
/// starting at (x0, y0), so a left/right pair with equal parameters shares its frame multiset.
struct ShapeClipSpec {
  Motion motion = Motion::Still;
  bool blinking = false;
  int x0 = 0;
  int y0 = 0;
  int blink_phase = 0;
};

struct SyntheticOptions {
  int height = 32;
  int width = 32;
  int square = 8;
};

struct SyntheticDataset {
  std::vector<ClipRecord> records;
  std::vector<VideoClip> clips;
  std::vector<ShapeClipSpec> specs;
};

/// Class names, in vocabulary order.
std::vector<std::string> synthetic_class_names();

/// Renders one clip: a fixed-texture square on a flat background, wrapping horizontally.
/// Pixel values are multiples of 1/255 so the frames survive an 8-bit round trip unchanged.
VideoClip render_shape_clip(const ShapeClipSpec& spec, int frames, const SyntheticOptions& opts = {});

/// `n_clips` clips cycling through move-left, move-right, keeping-still; about half also blink.
SyntheticDataset generate_moving_shapes(int n_clips, int frames_per_clip, std::uint64_t seed,
                                        const SyntheticOptions& opts = {}, const std::string& id_prefix = "clip");

/// Writes frames under dir/frames/<clip_id>/ and the manifest at dir/manifest.jsonl.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace amclip
