#include "amclip/text_encoder.hpp"

#include "amclip/errors.hpp"
#include "amclip/transformer.hpp"

namespace amclip {

using ag::Matrix;

TextTokenizer::Result tokenize(const Model& model, const std::string& label) {
  return model.tokenizer.tokenize(label);
}

ag::Var encode_text(Graph& g, const std::vector<int>& ids) {
  const Model& m = g.model();
  if (ids.size() < 2) throw ArgumentError("encode_text: token sequence needs BOS and EOS");
  for (int id : ids) {
    if (id < 0 || id >= m.tokenizer.vocab_size()) throw ArgumentError("encode_text: token id out of range");
  }
  ag::Var x = ag::gather_rows(g.param(m.slots.text_embed), ids);
  x = ag::add_constant(x, sinusoidal_table(static_cast<int>(ids.size()), m.config.dim));
  const int groups[] = {static_cast<int>(ids.size())};
  x = transformer_stack(g, m.slots.text, x, m.config.heads, groups, "text encoder");
  const int last[] = {static_cast<int>(ids.size()) - 1};
  x = ag::layer_norm(ag::gather_rows(x, last), g.param(m.slots.text_ln_gain), g.param(m.slots.text_ln_bias));
  return ag::l2_normalize_rows(x);
}

ag::Var encode_class_texts(Graph& g) {
  const Model& m = g.model();
  if (m.classes.empty()) throw ArgumentError("encode_class_texts: model has no classes");
  if (m.external_text) return ag::l2_normalize_rows(g.constant(*m.external_text));
  std::vector<ag::Var> rows;
  rows.reserve(m.classes.size());
  for (const auto& name : m.classes.classes()) rows.push_back(encode_text(g, m.tokenizer.tokenize(name).ids));
  return ag::concat_rows(rows);
}

ag::Var align(Graph& g, ag::Var text, ag::Var video) {
  const ModelSlots& s = g.model().slots;
  const int d = g.model().config.dim;
  if (text.cols() != d || video.cols() != d || video.rows() != 1) {
    throw ArgumentError("align: embedding dimensions disagree");
  }
  ag::Var q = ag::linear(text, g.param(s.align_wq), g.param(s.align_bq));
  ag::Var k = ag::linear(video, g.param(s.align_wk), g.param(s.align_bk));
  ag::Var v = ag::linear(video, g.param(s.align_wv), g.param(s.align_bv));
  const int qg[] = {static_cast<int>(text.rows())};
  const int kg[] = {1};
  ag::Var att = ag::attention(q, k, v, g.model().config.heads, qg, kg);
  return ag::l2_normalize_rows(ag::add(text, ag::linear(att, g.param(s.align_wo), g.param(s.align_bo))));
}

Embedding embed_text(const Model& model, const std::string& label) {
  Graph g(model);
  return encode_text(g, model.tokenizer.tokenize(label).ids).value().row(0).transpose();
}

Matrix class_text_embeddings(const Model& model) {
  Graph g(model);
  return encode_class_texts(g).value();
}

Matrix align(const Model& model, const Matrix& text, const Embedding& video) {
  Graph g(model);
  return align(g, g.constant(text), g.constant(video.transpose())).value();
}

}  // namespace amclip
