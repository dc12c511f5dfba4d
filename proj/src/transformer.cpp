#include "amclip/transformer.hpp"

#include <string>

#include "amclip/errors.hpp"

namespace amclip {

ag::Var transformer_block(Graph& g, const BlockSlots& b, ag::Var x, int heads, std::span<const int> groups) {
  ag::Var h = ag::layer_norm(x, g.param(b.ln1_gain), g.param(b.ln1_bias));
  ag::Var q = ag::linear(h, g.param(b.wq), g.param(b.bq));
  ag::Var k = ag::linear(h, g.param(b.wk), g.param(b.bk));
  ag::Var v = ag::linear(h, g.param(b.wv), g.param(b.bv));
  ag::Var att = ag::attention(q, k, v, heads, groups, groups);
  x = ag::add(x, ag::linear(att, g.param(b.wo), g.param(b.bo)));

  h = ag::layer_norm(x, g.param(b.ln2_gain), g.param(b.ln2_bias));
  h = ag::gelu(ag::linear(h, g.param(b.ff1_w), g.param(b.ff1_b)));
  return ag::add(x, ag::linear(h, g.param(b.ff2_w), g.param(b.ff2_b)));
}

ag::Var transformer_stack(Graph& g, const std::vector<BlockSlots>& blocks, ag::Var x, int heads,
                          std::span<const int> groups, std::string_view stage) {
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    x = transformer_block(g, blocks[l], x, heads, groups);
    if (!x.value().allFinite()) {
      throw NumericError(std::string(stage) + " layer " + std::to_string(l) + ": non-finite activations");
    }
  }
  return x;
}

}  // namespace amclip
