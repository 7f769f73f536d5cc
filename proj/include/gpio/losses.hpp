#pragma once

#include <cstddef>
#include <span>

#include "gpio/tensor.hpp"

namespace gpio {

/// Mean negative log-softmax at the true class over the masked rows.
Tensor node_ce_loss(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> mask);

/// -mean(ln p_pos) - mean(ln(1 - p_neg)), probabilities clamped to [1e-12, 1].
Tensor link_recon_loss(const Tensor& probs_pos, const Tensor& probs_neg);

/// Mean over graphs (rows) of negative log-softmax at the graph label.
Tensor graph_ce_loss(const Tensor& logits, std::span<const int> labels);

}  // namespace gpio
