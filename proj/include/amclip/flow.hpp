#pragma once

#include <functional>
#include <span>
#include <vector>

#include "amclip/corpus.hpp"

namespace amclip {

/// Coarse-to-fine block matching parameters for the reference flow backend.
struct BlockMatchConfig {
  int levels = 3;
  int block = 8;
  int radius = 4;
};

/// Dense flow from `a` to `b` by pyramidal SAD block matching.
/// Ties go to the smallest displacement magnitude, then lexicographic (dx, dy).
FlowField compute_flow(const Image& a, const Image& b, const BlockMatchConfig& cfg = {});

/// Flow for every consecutive frame pair of a clip (N-1 fields).
std::vector<FlowField> compute_clip_flows(const VideoClip& clip, const BlockMatchConfig& cfg = {});

/// Pluggable flow source: either the reference backend or a reader of precomputed fields.
using FlowProvider = std::function<std::vector<FlowField>(const VideoClip&)>;
FlowProvider block_matching_provider(BlockMatchConfig cfg = {});
FlowProvider cached_flow_provider(std::filesystem::path cache_dir);

/// Encodes flow as a 3-channel image: (dx, dy) mapped from [-R, R], magnitude from [0, R*sqrt(2)].
Image flow_to_image(const FlowField& flow, double max_displacement);
/// Inverse of the (dx, dy) channels of flow_to_image for in-range values.
FlowField image_to_flow(const Image& image, double max_displacement);

enum class TokenKind { Frame = 0, Flow = 1 };

struct Token {
  TokenKind kind = TokenKind::Frame;
  Image image;
  int source_index = 0;
};

/// Token sequence fed to the video encoder.
struct TokenSequence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Which token kinds a sequence carries.
enum class Modality { RgbFlow, Rgb, Flow };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

/// [I_t1, F_t1, I_t2, F_t2, ...]. The last frame has no outgoing field and reuses F_{t-1}.
TokenSequence interleave(const VideoClip& clip, std::span<const FlowField> flows, std::span<const int> indices,
                         double max_displacement);

/// interleave() restricted to one modality; RgbFlow is the full interleaving.
TokenSequence build_tokens(const VideoClip& clip, std::span<const FlowField> flows, std::span<const int> indices,
                           double max_displacement, Modality modality);

}  // namespace amclip
