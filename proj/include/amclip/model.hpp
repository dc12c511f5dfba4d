#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amclip/autograd.hpp"
#include "amclip/corpus.hpp"

namespace amclip {

using Embedding = Eigen::VectorXd;

struct EncoderConfig {
  int image_height = 32;
  int image_width = 32;
  int patch = 8;  // patch side length in pixels
  int dim = 64;
  int heads = 4;
  int frame_layers = 1;
  int temporal_layers = 1;
  int text_layers = 1;
  int max_text_len = 16;
  bool temporal_positions = true;

  int patches_per_frame() const { return (image_height / patch) * (image_width / patch); }
  int patch_features() const { return patch * patch * 3; }
  /// Throws ConfigError when the shape invariants do not hold.
  void validate() const;
};

/// Word-level tokenizer over the words of the class names. Ids 0..2 are UNK, BOS, EOS.
class TextTokenizer {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  struct Result {
    std::vector<int> ids;
    bool truncated = false;
  };

  TextTokenizer() = default;
  TextTokenizer(const std::vector<std::string>& texts, int max_len);
  static TextTokenizer from_words(std::vector<std::string> words, int max_len);

  /// Lowercases, splits on whitespace and punctuation, wraps in BOS/EOS.
  Result tokenize(const std::string& text) const;
  /// Joins the words of a token sequence; markers dropped, unknown words shown as <unk>.
  std::string detokenize(const std::vector<int>& ids) const;

  static std::vector<std::string> split_words(const std::string& text);

  int vocab_size() const { return static_cast<int>(words_.size()) + 3; }
  int max_len() const { return max_len_; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
  int max_len_ = 16;
};

/// Named parameter matrices, in registration order.
class ParamStore {
 public:
  int add(std::string name, ag::Matrix value);
  int slot(const std::string& name) const;
  std::size_t size() const { return values_.size(); }
  const std::string& name(int slot) const { return names_[slot]; }
  ag::Matrix& value(int slot) { return values_[slot]; }
  const ag::Matrix& value(int slot) const { return values_[slot]; }
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<ag::Matrix> values_;
  std::map<std::string, int> index_;
};

/// Gradient buffers parallel to a ParamStore.
struct Gradients {
  std::vector<ag::Matrix> values;

  explicit Gradients(const ParamStore& params);
  Gradients() = default;
  void add(const Gradients& other);
  void scale(double s);
};

struct BlockSlots {
  int ln1_gain, ln1_bias;
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_gain, ln2_bias;
  int ff1_w, ff1_b, ff2_w, ff2_b;
};

struct ModelSlots {
  int patch_w, patch_b, summary, kind;
  std::vector<BlockSlots> frame;
  int frame_ln_gain, frame_ln_bias;
  std::vector<BlockSlots> temporal;
  int temporal_ln_gain, temporal_ln_bias;
  int text_embed;
  std::vector<BlockSlots> text;
  int text_ln_gain, text_ln_bias;
  int align_wq, align_bq, align_wk, align_bk, align_wv, align_bv, align_wo, align_bo;
};

/// The single parameter set shared by every classifier in the ensemble.
struct Model {
  EncoderConfig config;
  LabelVocabulary classes;
  TextTokenizer tokenizer;
  ParamStore params;
  ModelSlots slots{};
  /// Optional fixed per-class text embeddings that replace the text encoder output.
  std::optional<ag::Matrix> external_text;

  /// Builds and randomly initializes a model for the given classes.
  static Model create(const EncoderConfig& config, const LabelVocabulary& classes, std::uint64_t seed);
};

/// Binds model parameters as gradient leaves on a tape (once per slot).
class Graph {
 public:
  explicit Graph(const Model& model) : model_(model), bound_(model.params.size()) {}

  ag::Tape& tape() { return tape_; }
  const Model& model() const { return model_; }
  ag::Var param(int slot);
  ag::Var constant(ag::Matrix m) { return tape_.constant(std::move(m)); }
  /// Adds d(loss)/d(param) for every bound parameter into `grads`.
  void collect(Gradients& grads) const;

 private:
  const Model& model_;
  ag::Tape tape_;
  std::vector<ag::Var> bound_;
};

/// Fixed sinusoidal table: rows are positions, even columns sin, odd columns cos.
ag::Matrix sinusoidal_table(int positions, int dim);

/// Per-class text embeddings from a JSON object {class name: [D numbers]}.
ag::Matrix load_external_text_embeddings(const std::filesystem::path& path, const LabelVocabulary& classes,
                                         int dim);

// Checkpoint: "AMCK", version byte, JSON metadata, named float32 groups, CRC32 trailer.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace amclip
