#pragma once

#include <span>
#include <vector>

#include "amclip/flow.hpp"
#include "amclip/model.hpp"

namespace amclip {

/// Patch matrix of one image: one row per P×P patch (row-major patch order), features ordered
/// (row, col, channel) inside the patch, standardized as (x - 0.5) / 0.25.
ag::Matrix extract_patches(const Image& image, const EncoderConfig& cfg);

/// Summary token (plus token-kind embedding) followed by the projected patches with spatial positions.
/// Output is (patches + 1) × D.
ag::Var patch_embed(Graph& g, const Image& image, TokenKind kind);

/// Runs the frame encoder over one frame's token matrix and returns the normalized summary state (1×D).
ag::Var encode_frame(Graph& g, ag::Var tokens);

/// Frame-level embeddings for many tokens at once (one row per token).
ag::Var encode_frames(Graph& g, std::span<const Token* const> tokens);

/// Temporal encoder over per-slot embeddings. `lengths` splits the rows into sequences; one row out each.
ag::Var encode_temporal(Graph& g, ag::Var frame_embeddings, std::span<const int> lengths);

/// Video embedding (1×D) of one token sequence.
ag::Var encode_video(Graph& g, const TokenSequence& seq);

/// Video embeddings (B×D) of several sequences, batched through one graph.
ag::Var encode_videos(Graph& g, std::span<const TokenSequence* const> seqs);

/// Forward-only convenience wrapper.
Embedding embed_video(const Model& model, const TokenSequence& seq);

}  // namespace amclip
