#pragma once

#include <string>
#include <vector>

#include "amclip/model.hpp"

namespace amclip {

/// Tokenizes `label` with the model's label-derived vocabulary.
TextTokenizer::Result tokenize(const Model& model, const std::string& label);

/// Unit-length embedding (1×D) of a token sequence: EOS-position state of the text transformer.
ag::Var encode_text(Graph& g, const std::vector<int>& ids);

/// Unit-length embedding for every class of the model (C×D), in vocabulary order.
/// Uses the external embeddings when the model carries them.
ag::Var encode_class_texts(Graph& g);

/// Video-guided refinement: text rows query the video embedding through one cross-attention
/// block; result = normalize(text + attention output). Rows keep their order.
ag::Var align(Graph& g, ag::Var text, ag::Var video);

// Forward-only wrappers.
Embedding embed_text(const Model& model, const std::string& label);
ag::Matrix class_text_embeddings(const Model& model);
ag::Matrix align(const Model& model, const ag::Matrix& text, const Embedding& video);

}  // namespace amclip
