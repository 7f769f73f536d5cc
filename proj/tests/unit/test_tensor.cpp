#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "doctest.h"
#include "gpio/errors.hpp"
#include "gpio/tensor.hpp"
#include "gradcheck.hpp"
#include "op_gradchecks.hpp"

using namespace gpio;
using gpio::testing::grad_check;
using gpio::testing::random_tensor;

namespace {

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor::from({r, c}, std::move(v)); }

void check_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
  REQUIRE(t.numel() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(t.data()[i] == doctest::Approx(expected[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("matmul examples") {
  auto a = mat(2, 2, {1, 2, 3, 4});
  check_values(matmul(a, mat(2, 2, {1, 0, 0, 1})), {1, 2, 3, 4});
  check_values(matmul(a, mat(2, 2, {5, 6, 7, 8})), {19, 22, 43, 50});

  std::mt19937_64 rng(1);
  auto z = matmul(Tensor::zeros({2, 3}), random_tensor({3, 4}, rng));
  CHECK(z.shape() == Shape{2, 4});
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("x [2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax_rows examples") {
  check_values(softmax_rows(mat(1, 2, {0, 0})), {0.5, 0.5});
  check_values(softmax_rows(mat(1, 2, {1000, 1000})), {0.5, 0.5});
  check_values(softmax_rows(mat(1, 2, {0, std::log(3.0)})), {0.25, 0.75});
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> ticks(-4096, 4096);
  std::uniform_int_distribution<int> shift(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    // Dyadic inputs and integer shifts keep x + c exact, so max-subtraction
    // must reproduce identical bits.
    std::vector<double> v(15);
    for (auto& x : v) x = ticks(rng) / 1024.0;
    auto x = mat(3, 5, v);
    const double c = shift(rng);
    std::vector<double> shifted(v);
    for (auto& s : shifted) s += c;
    auto y = softmax_rows(x);
    auto ys = softmax_rows(mat(3, 5, shifted));
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t k = 0; k < 5; ++k) total += y.at(r, k);
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    for (std::size_t i = 0; i < 15; ++i) CHECK(y.data()[i] == ys.data()[i]);
  }
}

TEST_CASE("masked softmax zeroes disallowed entries") {
  auto x = mat(2, 3, {1, 2, 3, 4, 5, 6});
  std::vector<std::uint8_t> allowed = {1, 0, 1, 0, 0, 1};
  auto y = masked_softmax_rows(x, allowed);
  CHECK(y.at(0, 1) == 0.0);
  CHECK(y.at(1, 2) == 1.0);
  CHECK(y.at(0, 0) + y.at(0, 2) == doctest::Approx(1.0));
  std::vector<std::uint8_t> none = {0, 0, 0, 1, 1, 1};
  CHECK_THROWS_AS(masked_softmax_rows(x, none), ShapeError);
  CHECK_THROWS_AS(masked_softmax_rows(x, std::vector<std::uint8_t>(5, 1)), ShapeError);
}

TEST_CASE("layer_norm examples") {
  auto ones = Tensor::full({3}, 1.0);
  auto zeros = Tensor::zeros({3});
  check_values(layer_norm(mat(1, 3, {2, 2, 2}), ones, zeros), {0, 0, 0});

  auto g2 = Tensor::full({2}, 1.0);
  auto b2 = Tensor::zeros({2});
  auto y = layer_norm(mat(1, 2, {-1, 1}), g2, b2);
  // eps = 1e-5 perturbs the unit variance slightly.
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-5));

  auto c = layer_norm(mat(2, 3, {1, 5, -2, 0.3, 0.1, 9}), Tensor::zeros({3}), Tensor::full({3}, 2.5));
  for (double v : c.data()) CHECK(v == 2.5);
}

TEST_CASE("elementwise examples") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
  auto cc = concat_cols(Tensor::zeros({4, 2}), Tensor::zeros({4, 3}));
  CHECK(cc.shape() == Shape{4, 5});
  CHECK_THROWS_AS(concat_cols(Tensor::zeros({4, 2}), Tensor::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), ShapeError);
  check_values(transpose(mat(2, 3, {1, 2, 3, 4, 5, 6})), {1, 4, 2, 5, 3, 6});
  check_values(slice_rows(mat(3, 2, {1, 2, 3, 4, 5, 6}), 1, 3), {3, 4, 5, 6});
  CHECK(mean(mat(2, 2, {1, 2, 3, 6})).item() == 3.0);
}

TEST_CASE("backward examples") {
  auto w = Tensor::from({2, 3}, {1, -2, 3, 0.5, 7, 9}, true);
  backward(sum(w));
  for (double g : w.grad()) CHECK(g == 1.0);

  auto v = Tensor::from({1, 2}, {1, 2}, true);
  backward(sum(mul(v, v)));
  CHECK(v.grad()[0] == doctest::Approx(2.0));
  CHECK(v.grad()[1] == doctest::Approx(4.0));

  CHECK_THROWS_AS(backward(add(v, v)), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences on random 3x3") {
  std::mt19937_64 rng(3);
  auto r = grad_check([](const std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); },
                      {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("every differentiable op passes a finite-difference check") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    for (const auto& e : gpio::testing::op_gradient_errors(rng)) {
      INFO("op " << e.op << " shape " << e.m << "x" << e.n << "x" << e.k);
      CHECK(e.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("dropout defaults off and rescales when enabled") {
  std::mt19937_64 rng(5);
  auto x = Tensor::full({10, 10}, 1.0);
  auto same = dropout(x, 0.0, rng);
  CHECK(same.node_id() == x.node_id());
  auto d = dropout(x, 0.5, rng);
  for (double v : d.data()) CHECK((v == 0.0 || v == 2.0));
  CHECK_THROWS_AS(dropout(x, 1.0, rng), ShapeError);
}

TEST_CASE("tape is topologically ordered and visits nodes once") {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  auto b = sigmoid(a);
  auto c = mul(b, b);
  auto d = add(c, b);
  auto loss = sum(matmul(d, a));
  auto tape = ComputationTape::record(loss);
  std::unordered_map<const detail::Node*, std::size_t> pos;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    CHECK(pos.emplace(tape.entries()[i].get(), i).second);
  }
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (const auto& p : tape.entries()[i]->parents) {
      if (p->requires_grad) CHECK(pos.at(p.get()) < i);
    }
  CHECK(tape.size() == 6);
}

TEST_CASE("shared subexpressions accumulate the sum of per-path gradients") {
  // Oracle: rebuild the same random expression with every leaf occurrence
  // replaced by its own fresh copy, then sum the copies' gradients.
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t num_leaves = 3;
    std::vector<Tensor> values;
    for (std::size_t i = 0; i < num_leaves; ++i) values.push_back(random_tensor({2, 2}, rng));

    // Encode a random tree of depth <= 4 as a recursive plan.
    struct Plan {
      int op;  // -1 leaf, 0 add, 1 mul, 2 sigmoid, 3 matmul
      std::size_t leaf = 0;
      std::vector<Plan> kids;
    };
    std::function<Plan(int)> make = [&](int depth) {
      Plan p;
      if (depth == 0 || std::bernoulli_distribution(0.25)(rng)) {
        p.op = -1;
        p.leaf = std::uniform_int_distribution<std::size_t>(0, num_leaves - 1)(rng);
        return p;
      }
      p.op = std::uniform_int_distribution<int>(0, 3)(rng);
      p.kids.push_back(make(depth - 1));
      if (p.op != 2) p.kids.push_back(make(depth - 1));
      return p;
    };
    Plan plan = make(4);

    auto eval = [&](auto&& self, const Plan& p, auto&& leaf_fn) -> Tensor {
      if (p.op == -1) return leaf_fn(p.leaf);
      auto a = self(self, p.kids[0], leaf_fn);
      if (p.op == 2) return sigmoid(a);
      auto b = self(self, p.kids[1], leaf_fn);
      if (p.op == 0) return add(a, b);
      if (p.op == 1) return mul(a, b);
      return matmul(a, b);
    };

    std::vector<Tensor> shared;
    for (auto& v : values) shared.push_back(Tensor::from(v.shape(), std::vector<double>(v.data().begin(), v.data().end()), true));
    auto loss = sum(eval(eval, plan, [&](std::size_t i) { return shared[i]; }));
    backward(loss);

    std::vector<std::vector<double>> oracle(num_leaves, std::vector<double>(4, 0.0));
    std::vector<std::pair<std::size_t, Tensor>> copies;
    auto loss2 = sum(eval(eval, plan, [&](std::size_t i) {
      auto t = Tensor::from(values[i].shape(), std::vector<double>(values[i].data().begin(), values[i].data().end()), true);
      copies.emplace_back(i, t);
      return t;
    }));
    backward(loss2);
    for (auto& [i, t] : copies)
      if (t.has_grad())
        for (std::size_t j = 0; j < 4; ++j) oracle[i][j] += t.grad()[j];

    for (std::size_t i = 0; i < num_leaves; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const double got = shared[i].has_grad() ? shared[i].grad()[j] : 0.0;
        CHECK(got == doctest::Approx(oracle[i][j]).epsilon(1e-12));
      }
  }
}

TEST_CASE("no-grad guard suppresses recording") {
  auto a = Tensor::from({1, 1}, {2.0}, true);
  Tensor b;
  {
    NoGradGuard guard;
    b = mul(a, a);
  }
  CHECK_FALSE(b.requires_grad());
  CHECK(grad_recording_enabled());
}
