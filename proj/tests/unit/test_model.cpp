#include <cmath>
#include <random>

#include "doctest.h"
#include "gpio/encodings.hpp"
#include "gpio/errors.hpp"
#include "gpio/model.hpp"
#include "model_checks.hpp"
#include "temp_dir.hpp"

using namespace gpio;
using namespace gpio::testing;

namespace {

AttentionBlock cross_block(std::size_t dq, std::size_t dkv, std::size_t out, std::size_t heads, std::size_t hd,
                           std::uint64_t seed) {
  ParameterStore store;
  std::mt19937_64 rng(seed);
  return AttentionBlock::create(store, "b", dq, dkv, out, heads, hd, false, rng);
}

}  // namespace

TEST_CASE("single key receives all attention weight") {
  std::mt19937_64 rng(1);
  auto blk = cross_block(4, 3, 4, 2, 2, 7);
  std::vector<Matrix> maps;
  AttentionOptions opt;
  opt.capture = &maps;
  auto out = multi_head_cross_attention(random_tensor({1, 4}, rng), random_tensor({1, 3}, rng), blk, opt);
  CHECK(out.shape() == Shape{1, 4});
  REQUIRE(maps.size() == 1);
  CHECK(maps[0].data[0] == 1.0);
}

TEST_CASE("cross-attention output takes the query shape") {
  std::mt19937_64 rng(2);
  auto blk = cross_block(8, 11, 8, 2, 4, 3);
  auto out = multi_head_cross_attention(random_tensor({5, 8}, rng), random_tensor({17, 11}, rng), blk);
  CHECK(out.shape() == Shape{5, 8});
}

TEST_CASE("masking all but one key equals attending to that key alone") {
  std::mt19937_64 rng(3);
  auto blk = cross_block(4, 3, 4, 2, 2, 9);
  auto q = random_tensor({3, 4}, rng);
  auto kv = random_tensor({6, 3}, rng);
  std::vector<std::uint8_t> mask = {0, 0, 0, 1, 0, 0};
  AttentionOptions opt;
  opt.key_mask = mask;
  // Skip the kv layer norm so the lone row is normalized identically in both runs.
  opt.normalize_kv = false;
  auto masked = multi_head_cross_attention(q, kv, blk, opt);
  AttentionOptions plain;
  plain.normalize_kv = false;
  auto single = multi_head_cross_attention(q, slice_rows(kv, 3, 4), blk, plain);
  CHECK(max_abs_diff(masked.to_matrix(), single.to_matrix()) < 1e-14);

  std::vector<std::uint8_t> too_long(7, 1);
  opt.key_mask = too_long;
  CHECK_THROWS_AS(multi_head_cross_attention(q, kv, blk, opt), ShapeError);
}

TEST_CASE("self-attention shape and singleton reduction") {
  ParameterStore store;
  std::mt19937_64 rng(4);
  auto blk = AttentionBlock::create(store, "s", 6, 6, 6, 3, 2, true, rng);
  auto x = random_tensor({5, 6}, rng);
  CHECK(multi_head_self_attention(x, blk).shape() == Shape{5, 6});
  std::vector<Matrix> maps;
  AttentionOptions opt;
  opt.capture = &maps;
  multi_head_self_attention(random_tensor({1, 6}, rng), blk, opt);
  CHECK(maps.at(0).data[0] == 1.0);
}

TEST_CASE("zero projections reduce a block to input plus MLP of the normalized input") {
  ParameterStore store;
  std::mt19937_64 rng(5);
  auto blk = AttentionBlock::create(store, "s", 4, 4, 4, 1, 3, true, rng);
  for (auto* t : {&blk.wq, &blk.wk, &blk.wv, &blk.wo})
    for (auto& v : t->mutable_data()) v = 0.0;
  auto x = random_tensor({3, 4}, rng);
  auto got = multi_head_self_attention(x, blk);
  auto h = layer_norm(x, blk.ln_mlp_gain, blk.ln_mlp_bias);
  auto mlp = add_row_broadcast(matmul(gelu(add_row_broadcast(matmul(h, blk.w1), blk.b1)), blk.w2), blk.b2);
  CHECK(max_abs_diff(got.to_matrix(), add(x, mlp).to_matrix()) < 1e-15);
}

TEST_CASE("forward shapes per task") {
  std::mt19937_64 rng(6);
  SUBCASE("node task, Cora-like widths") {
    auto c = tiny_config(Task::Node, 1433 + 4, 1433, 7);
    c.latent_length = 8;
    c.latent_dim = 16;
    GraphPerceiver model(c, 1);
    auto out = model.forward(random_tensor({40, 1437}, rng), random_tensor({40, 1433}, rng));
    REQUIRE(out.logits);
    CHECK(out.logits->shape() == Shape{40, 7});
    CHECK(out.decoded.shape() == Shape{40, 1433});
  }
  SUBCASE("graph task") {
    GraphPerceiver model(tiny_config(Task::Graph, 9, 2, 2), 1);
    auto out = model.forward(random_tensor({13, 9}, rng), Tensor());
    CHECK(out.logits->shape() == Shape{1, 2});
  }
  SUBCASE("link task has no logits") {
    auto c = tiny_config(Task::Link, 7, 5, 0);
    GraphPerceiver model(c, 1);
    auto out = model.forward(random_tensor({10, 7}, rng), random_tensor({10, 5}, rng));
    CHECK_FALSE(out.logits);
    CHECK(out.decoded.shape() == Shape{10, c.resolved_decoder_out_dim()});
    CHECK(c.resolved_decoder_out_dim() == 3);
  }
  SUBCASE("inconsistent shapes") {
    GraphPerceiver model(tiny_config(Task::Node, 7, 5, 3), 1);
    CHECK_THROWS_AS(model.forward(random_tensor({10, 6}, rng), random_tensor({10, 5}, rng)), ShapeError);
    CHECK_THROWS_AS(model.forward(random_tensor({10, 7}, rng), random_tensor({9, 5}, rng)), ShapeError);
  }
}

TEST_CASE("model config validation") {
  auto c = tiny_config(Task::Node, 3, 3, 2);
  c.depth = 0;
  CHECK_THROWS_AS(GraphPerceiver(c, 1), ConfigError);
  c = tiny_config(Task::Graph, 3, 4, 2);
  CHECK_THROWS_AS(GraphPerceiver(c, 1), ConfigError);
  c = tiny_config(Task::Node, 3, 3, 2);
  CHECK(ModelConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("decode_edges") {
  auto z = Tensor::from({3, 2}, {0, 0, 1, 2, 3, 4});
  std::vector<std::uint32_t> u = {0, 1, 2}, v = {0, 2, 1};
  auto p = decode_edges(z, u, v);
  CHECK(p.data()[0] == 0.5);
  CHECK(p.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-11.0))).epsilon(1e-15));
  CHECK(p.data()[1] == doctest::Approx(0.9999833).epsilon(1e-7));
  CHECK(p.data()[1] == p.data()[2]);
  std::vector<std::uint32_t> bad = {3};
  std::vector<std::uint32_t> ok = {0};
  CHECK_THROWS_AS(decode_edges(z, bad, ok), ShapeError);
}

TEST_CASE("end-to-end gradient check on a tiny model") {
  for (std::uint64_t seed : {7, 19}) {
    auto r = model_gradient_errors(seed);
    CHECK(r.node.checked > 0);
    CHECK(r.node.max_rel_error < 1e-4);
    CHECK(r.graph.max_rel_error < 1e-4);
    CHECK(r.link.max_rel_error < 1e-4);
    CHECK(r.node_at_init.max_rel_error < 1e-4);
  }
}

TEST_CASE("batched graph forward equals per-graph forwards") {
  std::mt19937_64 rng(8);
  auto c = tiny_config(Task::Graph, 4, 3, 3);
  c.mhca_heads = 2;
  c.mhsa_heads = 2;
  c.depth = 2;
  GraphPerceiver model(c, 3);
  std::vector<Tensor> parts = {random_tensor({4, 4}, rng), random_tensor({7, 4}, rng), random_tensor({2, 4}, rng)};
  ForwardOptions fo;
  fo.input_offsets = {0, 4, 11, 13};
  fo.capture_attention = true;
  auto batched = model.forward(concat_rows(parts), Tensor(), fo);
  REQUIRE(batched.logits->shape() == Shape{3, 3});
  REQUIRE(batched.encoder_attention.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    ForwardOptions one;
    one.capture_attention = true;
    auto single = model.forward(parts[b], Tensor(), one);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(single.logits->data()[k] - batched.logits->at(b, k)) < 1e-13);
    CHECK(max_abs_diff(single.encoder_attention[0], batched.encoder_attention[b]) < 1e-14);
  }
}

TEST_CASE("permutation invariance and equivariance") {
  auto w = permutation_worst(9);
  CHECK(w.graph <= 1e-8);
  CHECK(w.node <= 1e-8);
  CHECK(w.link <= 1e-8);
}

TEST_CASE("dropping the first layer norm changes outputs") {
  std::mt19937_64 rng(10);
  auto c = tiny_config(Task::Graph, 5, 2, 2);
  GraphPerceiver with(c, 4);
  c.use_first_layer_norm = false;
  GraphPerceiver without(c, 4);
  auto x = random_tensor({6, 5}, rng, -3, 3);
  auto a = with.forward(x, Tensor()).logits->to_matrix();
  auto b = without.forward(x, Tensor()).logits->to_matrix();
  CHECK(max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(11);
  auto c = tiny_config(Task::Node, 3, 2, 3);
  GraphPerceiver model(c, 5);
  TempDir d;
  auto path = d.path() / "m.ckpt";
  save_checkpoint(path, model, {{"seed", 5}});
  auto ck = load_checkpoint(path);
  CHECK(ck.extra["seed"] == 5);
  CHECK(ck.model.parameters().names() == model.parameters().names());
  auto x = random_tensor({4, 3}, rng);
  auto q = random_tensor({4, 2}, rng);
  CHECK(model.forward(x, q).logits->to_matrix() == ck.model.forward(x, q).logits->to_matrix());
  d.write("bad.ckpt", "NOTACKPT........");
  CHECK_THROWS_AS(load_checkpoint(d.path() / "bad.ckpt"), DatasetError);
}
