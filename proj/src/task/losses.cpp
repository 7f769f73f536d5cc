#include "gpio/losses.hpp"

#include <vector>

#include "gpio/errors.hpp"

namespace gpio {

namespace {

Tensor mean_nll(const Tensor& logits, std::span<const int> labels) {
  std::vector<std::size_t> cls(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols()) {
      throw ShapeError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(logits.cols()) + ")");
    }
    cls[i] = static_cast<std::size_t>(labels[i]);
  }
  return scale(mean(pick_per_row(log_softmax_rows(logits), cls)), -1.0);
}

}  // namespace

Tensor node_ce_loss(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
  if (mask.empty()) throw ShapeError("node_ce_loss: empty mask");
  if (labels.size() != logits.rows()) {
    throw ShapeError("node_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " logit rows");
  }
  std::vector<int> picked;
  picked.reserve(mask.size());
  for (auto i : mask) {
    if (i >= labels.size()) throw ShapeError("node_ce_loss: mask index out of range");
    picked.push_back(labels[i]);
  }
  return mean_nll(gather_rows(logits, mask), picked);
}

Tensor link_recon_loss(const Tensor& probs_pos, const Tensor& probs_neg) {
  if (probs_pos.numel() == 0 || probs_neg.numel() == 0) throw ShapeError("link_recon_loss: empty edge set");
  constexpr double floor = 1e-12;
  Tensor pos = mean(log(clamp(probs_pos, floor, 1.0)));
  Tensor one_minus = sub(Tensor::full(probs_neg.shape(), 1.0), probs_neg);
  Tensor neg = mean(log(clamp(one_minus, floor, 1.0)));
  return scale(add(pos, neg), -1.0);
}

Tensor graph_ce_loss(const Tensor& logits, std::span<const int> labels) {
  if (labels.empty()) throw ShapeError("graph_ce_loss: empty batch");
  if (labels.size() != logits.rows()) {
    throw ShapeError("graph_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " graphs");
  }
  return mean_nll(logits, labels);
}

}  // namespace gpio
