#include "gpio/optim.hpp"

#include <cmath>

#include "gpio/errors.hpp"

namespace gpio {

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                     " parameters");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: optimizer state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].numel() || state.first_moment[i].size() != params[i].numel()) {
      throw ShapeError("adam_step: gradient/moment size mismatch for parameter " + std::to_string(i) + " of shape " +
                       shape_string(params[i].shape()));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - state.learning_rate * state.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] *= decay;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      grads.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      grads.emplace_back(p.numel(), 0.0);
    }
  }
  adam_step(params, grads, state);
}

Adam::Adam(std::vector<Tensor> params, double learning_rate, double weight_decay) : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
  state_.weight_decay = weight_decay;
}

void Adam::step() { adam_step(params_, state_); }

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace gpio
