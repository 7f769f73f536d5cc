#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gpio/tensor.hpp"

namespace gpio {

struct AdamState {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update with decoupled weight decay.
///
/// Decay is applied first (w <- w * (1 - lr * wd)), then the adaptive step
/// w <- w - lr * m_hat / (sqrt(v_hat) + eps). Moment buffers are created on the
/// first call and must keep matching the parameter shapes afterwards.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state);

/// Same update reading each parameter's accumulated grad (missing grad = zero).
void adam_step(std::span<Tensor> params, AdamState& state);

class Adam {
 public:
  Adam(std::vector<Tensor> params, double learning_rate, double weight_decay);

  void step();
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace gpio
