#include "amclip/video_encoder.hpp"

#include <string>

#include "amclip/errors.hpp"
#include "amclip/transformer.hpp"

namespace amclip {

using ag::Matrix;

Matrix extract_patches(const Image& image, const EncoderConfig& cfg) {
  cfg.validate();
  if (image.height != cfg.image_height || image.width != cfg.image_width) {
    throw ConfigError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                      " does not match encoder input " + std::to_string(cfg.image_height) + "x" +
                      std::to_string(cfg.image_width));
  }
  const int p = cfg.patch;
  const int cols = image.width / p;
  Matrix out(cfg.patches_per_frame(), cfg.patch_features());
  for (int r = 0; r < out.rows(); ++r) {
    const int py = (r / cols) * p;
    const int px = (r % cols) * p;
    int f = 0;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int c = 0; c < 3; ++c) out(r, f++) = (image.at(py + y, px + x, c) - 0.5) / 0.25;
  }
  return out;
}

namespace {

// Builds the frame-encoder input for T frames: per frame one summary row followed by n patch rows.
ag::Var frame_token_matrix(Graph& g, std::span<const Token* const> tokens) {
  const EncoderConfig& cfg = g.model().config;
  const ModelSlots& s = g.model().slots;
  const int n = cfg.patches_per_frame();
  const auto t_count = static_cast<Eigen::Index>(tokens.size());

  Matrix patches(t_count * n, cfg.patch_features());
  for (Eigen::Index t = 0; t < t_count; ++t) patches.middleRows(t * n, n) = extract_patches(tokens[t]->image, cfg);
  ag::Var proj = ag::linear(g.constant(std::move(patches)), g.param(s.patch_w), g.param(s.patch_b));
  const Matrix pos = sinusoidal_table(n, cfg.dim);
  proj = ag::add_constant(proj, pos.replicate(t_count, 1));

  ag::Var summary = g.param(s.summary);
  ag::Var kind = g.param(s.kind);
  std::vector<int> kinds(tokens.size());
  Matrix out(t_count * (n + 1), cfg.dim);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    kinds[t] = static_cast<int>(tokens[t]->kind);
    out.row(t * (n + 1)) = summary.value().row(0) + kind.value().row(kinds[t]);
    out.middleRows(t * (n + 1) + 1, n) = proj.value().middleRows(t * n, n);
  }
  return g.tape().push(std::move(out), {proj, summary, kind},
                       [proj, summary, kind, kinds, n](ag::Tape& tape, const Matrix& grad) {
                         const auto t_count = static_cast<Eigen::Index>(kinds.size());
                         Matrix dproj(t_count * n, grad.cols());
                         Matrix dsum = Matrix::Zero(1, grad.cols());
                         Matrix dkind = Matrix::Zero(2, grad.cols());
                         for (Eigen::Index t = 0; t < t_count; ++t) {
                           dsum += grad.row(t * (n + 1));
                           dkind.row(kinds[t]) += grad.row(t * (n + 1));
                           dproj.middleRows(t * n, n) = grad.middleRows(t * (n + 1) + 1, n);
                         }
                         tape.accumulate(proj, dproj);
                         tape.accumulate(summary, dsum);
                         tape.accumulate(kind, dkind);
                       });
}

}  // namespace

ag::Var patch_embed(Graph& g, const Image& image, TokenKind kind) {
  const Token token{kind, image, 0};
  const Token* ptr = &token;
  return frame_token_matrix(g, std::span<const Token* const>(&ptr, 1));
}

ag::Var encode_frame(Graph& g, ag::Var tokens) {
  const EncoderConfig& cfg = g.model().config;
  const ModelSlots& s = g.model().slots;
  if (tokens.cols() != cfg.dim) throw ArgumentError("encode_frame: token dimension must equal D");
  const int groups[] = {static_cast<int>(tokens.rows())};
  ag::Var x = transformer_stack(g, s.frame, tokens, cfg.heads, groups, "frame encoder");
  const int first[] = {0};
  return ag::layer_norm(ag::gather_rows(x, first), g.param(s.frame_ln_gain), g.param(s.frame_ln_bias));
}

ag::Var encode_frames(Graph& g, std::span<const Token* const> tokens) {
  if (tokens.empty()) throw ArgumentError("encode_frames: no tokens");
  const EncoderConfig& cfg = g.model().config;
  const ModelSlots& s = g.model().slots;
  const int per = cfg.patches_per_frame() + 1;
  ag::Var x = frame_token_matrix(g, tokens);
  const std::vector<int> groups(tokens.size(), per);
  x = transformer_stack(g, s.frame, x, cfg.heads, groups, "frame encoder");
  std::vector<int> summary_rows(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) summary_rows[t] = static_cast<int>(t) * per;
  return ag::layer_norm(ag::gather_rows(x, summary_rows), g.param(s.frame_ln_gain), g.param(s.frame_ln_bias));
}

ag::Var encode_temporal(Graph& g, ag::Var frame_embeddings, std::span<const int> lengths) {
  const EncoderConfig& cfg = g.model().config;
  const ModelSlots& s = g.model().slots;
  ag::Var x = frame_embeddings;
  if (cfg.temporal_positions) {
    int longest = 0;
    for (int len : lengths) longest = std::max(longest, len);
    const Matrix table = sinusoidal_table(longest, cfg.dim);
    Matrix pos(x.rows(), cfg.dim);
    Eigen::Index r = 0;
    for (int len : lengths) {
      pos.middleRows(r, len) = table.topRows(len);
      r += len;
    }
    x = ag::add_constant(x, pos);
  }
  x = transformer_stack(g, s.temporal, x, cfg.heads, lengths, "temporal encoder");
  return ag::layer_norm(ag::group_mean_rows(x, lengths), g.param(s.temporal_ln_gain), g.param(s.temporal_ln_bias));
}

ag::Var encode_videos(Graph& g, std::span<const TokenSequence* const> seqs) {
  std::vector<const Token*> tokens;
  std::vector<int> lengths;
  for (const TokenSequence* seq : seqs) {
    if (seq->empty()) throw ArgumentError("encode_video: empty token sequence");
    for (const Token& t : seq->tokens) tokens.push_back(&t);
    lengths.push_back(static_cast<int>(seq->size()));
  }
  if (lengths.empty()) throw ArgumentError("encode_videos: no sequences");
  return encode_temporal(g, encode_frames(g, tokens), lengths);
}

ag::Var encode_video(Graph& g, const TokenSequence& seq) {
  const TokenSequence* ptr = &seq;
  return encode_videos(g, std::span<const TokenSequence* const>(&ptr, 1));
}

Embedding embed_video(const Model& model, const TokenSequence& seq) {
  Graph g(model);
  return encode_video(g, seq).value().row(0).transpose();
}

}  // namespace amclip
