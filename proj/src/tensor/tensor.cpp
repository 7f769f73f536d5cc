#include "gpio/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "gpio/errors.hpp"

namespace gpio {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

void Node::accumulate(std::span<const double> g) {
  auto& dst = ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace detail

namespace {
thread_local bool g_recording = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> value) {
  if (shape_numel(shape) != value.size()) {
    throw ShapeError("tensor data length " + std::to_string(value.size()) + " does not match shape " +
                     shape_string(shape));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}
}  // namespace

bool grad_recording_enabled() { return g_recording; }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  auto node = new_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(const Matrix& m, bool requires_grad) { return from({m.rows, m.cols}, m.data, requires_grad); }

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw ShapeError("rows() requires a matrix, got " + shape_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw ShapeError("cols() requires a matrix, got " + shape_string(s));
  return s[1];
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

Matrix Tensor::to_matrix() const {
  const auto& s = shape();
  if (s.size() == 2) return Matrix(s[0], s[1], node_->value);
  if (s.size() == 1) return Matrix(1, s[0], node_->value);
  return Matrix(1, 1, node_->value);
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor make_result(Shape shape, std::vector<double> value, const char* op, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward) {
  auto node = new_node(std::move(shape), std::move(value));
  node->op = op;
  if (g_recording) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& t : inputs) node->parents.push_back(t.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

ComputationTape ComputationTape::record(const Tensor& root) {
  ComputationTape tape;
  if (!root.defined()) return tape;
  // Iterative post-order DFS: a node is emitted after all of its parents.
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node_id());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) stack.emplace_back(parent, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void ComputationTape::backward() const {
  if (order_.empty()) return;
  auto& root = order_.back();
  if (root->value.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(root->shape));
  }
  // Intermediate grads are scratch for this pass only; leaves keep accumulating.
  for (auto& n : order_) {
    if (n->backward) n->grad.clear();
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& node = **it;
    if (!node.backward) continue;
    if (!node.grad.empty()) node.backward(node);
    std::vector<double>().swap(node.grad);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ShapeError("backward() on an undefined tensor");
  if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;
  ComputationTape::record(loss).backward();
}

}  // namespace gpio
