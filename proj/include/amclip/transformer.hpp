#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "amclip/model.hpp"

namespace amclip {

/// Pre-norm block: x + MHSA(LN(x)), then + FFN(LN(x)) with a ×4 GELU feed-forward.
/// Attention is restricted to the row groups in `groups`.
ag::Var transformer_block(Graph& g, const BlockSlots& b, ag::Var x, int heads, std::span<const int> groups);

/// Applies `blocks` in order. Non-finite activations raise NumericError naming `stage` and the layer.
ag::Var transformer_stack(Graph& g, const std::vector<BlockSlots>& blocks, ag::Var x, int heads,
                          std::span<const int> groups, std::string_view stage);

}  // namespace amclip
