#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpio/matrix.hpp"

namespace gpio {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  void accumulate(std::span<const double> g);
  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense float64 tensor participating in a dynamic reverse-mode graph.
///
/// A Tensor is a cheap handle; copies alias the same storage. Every op returns
/// a fresh node that remembers its inputs when any of them requires a gradient.
/// Rank is 0 (scalar), 1 or 2; the attention stack only needs matrices.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor from(const Matrix& m, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct write access for parameter updates and initialization. Never use on
  // a tensor whose value was captured by a pending backward pass.
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  Matrix to_matrix() const;
  // Value copy without history.
  Tensor detach() const;

  const detail::Node* node_id() const { return node_.get(); }
  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, const char*, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);
};

// Builds an op result; attaches parents and the backward rule only when some
// input requires a gradient and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> value, const char* op, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward);

/// Disables graph recording on this thread while alive (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

/// Topologically ordered record of the operations reachable from a root.
/// Inputs always precede the ops that consume them.
class ComputationTape {
 public:
  static ComputationTape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<detail::Node>>& entries() const { return order_; }

  // Seeds d(root)/d(root) = 1 and runs every backward rule once in reverse order.
  void backward() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> order_;
};

/// Accumulates d(loss)/d(x) into every requires_grad tensor reachable from loss.
/// loss must hold exactly one element.
void backward(const Tensor& loss);

// ---- arithmetic -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a[m×n] + bias[n] broadcast over rows.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);

// ---- structural -----------------------------------------------------------

Tensor transpose(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
// Stacks `times` copies of a vertically.
Tensor repeat_rows(const Tensor& a, std::size_t times);
// out[i] = a[i, index[i]] as an m×1 column.
Tensor pick_per_row(const Tensor& a, std::span<const std::size_t> index);
// out[i] = <a[i,:], b[i,:]> as an m×1 column.
Tensor row_dot(const Tensor& a, const Tensor& b);

// ---- nonlinear ------------------------------------------------------------

Tensor softmax_rows(const Tensor& a);
// allowed has a.rows()*a.cols() entries; disallowed positions get weight 0.
// Every row needs at least one allowed entry.
Tensor masked_softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng);

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

}  // namespace gpio
