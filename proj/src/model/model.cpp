#include "gpio/model.hpp"

#include <cmath>

#include "gpio/errors.hpp"

namespace gpio {

using nlohmann::json;

std::size_t ModelConfig::resolved_decoder_out_dim() const {
  if (decoder_out_dim != 0) return decoder_out_dim;
  if (task == Task::Link) return std::min<std::size_t>(mhca_heads * mhca_head_dim, 256);
  return query_dim;
}

void ModelConfig::validate() const {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model: " + what);
  };
  need(input_dim >= 1, "input_dim must be positive");
  need(query_dim >= 1, "query_dim must be positive");
  need(latent_length >= 1, "latent_length must be positive");
  need(latent_dim >= 1, "latent_dim must be positive");
  need(mhca_heads >= 1 && mhca_head_dim >= 1, "MHCA heads and head dimension must be positive");
  need(mhsa_heads >= 1 && mhsa_head_dim >= 1, "MHSA heads and head dimension must be positive");
  need(depth >= 1, "depth must be at least 1");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  if (task != Task::Link) need(num_classes >= 2, "node and graph tasks need num_classes >= 2");
  if (task == Task::Graph) need(query_dim == num_classes, "graph task query_dim must equal num_classes");
}

json ModelConfig::to_json() const {
  return {{"task", to_string(task)},
          {"input_dim", input_dim},
          {"query_dim", query_dim},
          {"latent_length", latent_length},
          {"latent_dim", latent_dim},
          {"mhca_heads", mhca_heads},
          {"mhca_head_dim", mhca_head_dim},
          {"mhsa_heads", mhsa_heads},
          {"mhsa_head_dim", mhsa_head_dim},
          {"depth", depth},
          {"num_classes", num_classes},
          {"decoder_out_dim", decoder_out_dim},
          {"use_first_layer_norm", use_first_layer_norm},
          {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.task = parse_task(j.at("task").get<std::string>());
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.query_dim = j.at("query_dim").get<std::size_t>();
    c.latent_length = j.at("latent_length").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.mhca_heads = j.at("mhca_heads").get<std::size_t>();
    c.mhca_head_dim = j.at("mhca_head_dim").get<std::size_t>();
    c.mhsa_heads = j.at("mhsa_heads").get<std::size_t>();
    c.mhsa_head_dim = j.at("mhsa_head_dim").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.decoder_out_dim = j.at("decoder_out_dim").get<std::size_t>();
    c.use_first_layer_norm = j.at("use_first_layer_norm").get<bool>();
    c.dropout = j.at("dropout").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  value.set_requires_grad(true);
  names_.push_back(name);
  tensors_.push_back(value);
  return value;
}

bool ParameterStore::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("no parameter named " + name);
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = u(rng);
  return Tensor::from({fan_in, fan_out}, std::move(v));
}

Tensor small_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = 0.02 * n(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_row_broadcast(matmul(x, w), b); }

void check_offsets(const std::vector<std::size_t>& offsets, std::size_t rows, const char* what) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != rows) {
    throw ShapeError(std::string(what) + " segment offsets must start at 0 and end at " + std::to_string(rows));
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] <= offsets[i - 1]) throw ShapeError(std::string(what) + " segments must be nonempty");
  }
}

// Scaled dot-product attention per head and per segment; returns the
// concatenated head outputs (a x heads*head_dim).
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, std::size_t head_dim,
              const AttentionOptions& opt) {
  const std::size_t a = q.rows(), b = k.rows();
  if (!opt.key_mask.empty() && opt.key_mask.size() != b) {
    throw ShapeError("attention key mask has " + std::to_string(opt.key_mask.size()) + " entries for " +
                     std::to_string(b) + " key rows");
  }
  const bool segmented = opt.segments && !opt.segments->query.empty();
  if (segmented) {
    check_offsets(opt.segments->query, a, "query");
    check_offsets(opt.segments->key, b, "key");
    if (opt.segments->query.size() != opt.segments->key.size()) {
      throw ShapeError("query and key segment counts differ");
    }
  }
  const std::size_t count = segmented ? opt.segments->count() : 1;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<Tensor> per_segment;
  per_segment.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t q0 = segmented ? opt.segments->query[s] : 0, q1 = segmented ? opt.segments->query[s + 1] : a;
    const std::size_t k0 = segmented ? opt.segments->key[s] : 0, k1 = segmented ? opt.segments->key[s + 1] : b;
    const Tensor qs = segmented ? slice_rows(q, q0, q1) : q;
    const Tensor ks = segmented ? slice_rows(k, k0, k1) : k;
    const Tensor vs = segmented ? slice_rows(v, k0, k1) : v;
    std::vector<std::uint8_t> mask;
    if (!opt.key_mask.empty()) {
      mask.reserve((q1 - q0) * (k1 - k0));
      for (std::size_t r = q0; r < q1; ++r) mask.insert(mask.end(), opt.key_mask.begin() + k0, opt.key_mask.begin() + k1);
    }
    Matrix averaged;
    if (opt.capture) averaged = Matrix(q1 - q0, k1 - k0);

    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * head_dim, c1 = c0 + head_dim;
      const Tensor qh = heads > 1 ? slice_cols(qs, c0, c1) : qs;
      const Tensor kh = heads > 1 ? slice_cols(ks, c0, c1) : ks;
      const Tensor vh = heads > 1 ? slice_cols(vs, c0, c1) : vs;
      Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      Tensor weights = mask.empty() ? softmax_rows(scores) : masked_softmax_rows(scores, mask);
      if (opt.capture) {
        auto w = weights.data();
        for (std::size_t i = 0; i < w.size(); ++i) averaged.data[i] += w[i] / static_cast<double>(heads);
      }
      head_out.push_back(matmul(weights, vh));
    }
    if (opt.capture) opt.capture->push_back(std::move(averaged));
    per_segment.push_back(heads > 1 ? concat_cols(head_out) : head_out.front());
  }
  return count > 1 ? concat_rows(per_segment) : per_segment.front();
}

Tensor maybe_dropout(const Tensor& x, const AttentionOptions& opt) {
  if (opt.dropout <= 0.0) return x;
  if (!opt.rng) throw ConfigError("dropout requires a random generator");
  return dropout(x, opt.dropout, *opt.rng);
}

Tensor finish_block(const Tensor& query, const Tensor& attended, const AttentionBlock& blk,
                    const AttentionOptions& opt) {
  Tensor o = maybe_dropout(linear(attended, blk.wo, blk.bo), opt);
  if (blk.out_dim == blk.query_dim) o = add(o, query);
  Tensor h = layer_norm(o, blk.ln_mlp_gain, blk.ln_mlp_bias);
  Tensor m = linear(gelu(linear(h, blk.w1, blk.b1)), blk.w2, blk.b2);
  return add(o, maybe_dropout(m, opt));
}

void check_cols(const Tensor& t, std::size_t want, const char* what) {
  if (t.rank() != 2 || t.cols() != want) {
    throw ShapeError(std::string(what) + " has shape " + shape_string(t.shape()) + ", expected " +
                     std::to_string(want) + " columns");
  }
}

}  // namespace

AttentionBlock AttentionBlock::create(ParameterStore& store, const std::string& prefix, std::size_t query_dim,
                                      std::size_t kv_dim, std::size_t out_dim, std::size_t heads,
                                      std::size_t head_dim, bool self_attention, std::mt19937_64& rng) {
  AttentionBlock b;
  b.query_dim = query_dim;
  b.kv_dim = kv_dim;
  b.out_dim = out_dim;
  b.heads = heads;
  b.head_dim = head_dim;
  b.self_attention = self_attention;
  const std::size_t proj = heads * head_dim;
  const auto p = [&](const char* n) { return prefix + "." + n; };
  b.ln_q_gain = store.add(p("ln_q.gain"), Tensor::full({query_dim}, 1.0));
  b.ln_q_bias = store.add(p("ln_q.bias"), Tensor::zeros({query_dim}));
  if (!self_attention) {
    b.ln_kv_gain = store.add(p("ln_kv.gain"), Tensor::full({kv_dim}, 1.0));
    b.ln_kv_bias = store.add(p("ln_kv.bias"), Tensor::zeros({kv_dim}));
  }
  b.wq = store.add(p("wq"), glorot(query_dim, proj, rng));
  b.bq = store.add(p("bq"), Tensor::zeros({proj}));
  b.wk = store.add(p("wk"), glorot(kv_dim, proj, rng));
  b.bk = store.add(p("bk"), Tensor::zeros({proj}));
  b.wv = store.add(p("wv"), glorot(kv_dim, proj, rng));
  b.bv = store.add(p("bv"), Tensor::zeros({proj}));
  b.wo = store.add(p("wo"), glorot(proj, out_dim, rng));
  b.bo = store.add(p("bo"), Tensor::zeros({out_dim}));
  b.ln_mlp_gain = store.add(p("ln_mlp.gain"), Tensor::full({out_dim}, 1.0));
  b.ln_mlp_bias = store.add(p("ln_mlp.bias"), Tensor::zeros({out_dim}));
  b.w1 = store.add(p("mlp.w1"), glorot(out_dim, proj, rng));
  b.b1 = store.add(p("mlp.b1"), Tensor::zeros({proj}));
  b.w2 = store.add(p("mlp.w2"), glorot(proj, out_dim, rng));
  b.b2 = store.add(p("mlp.b2"), Tensor::zeros({out_dim}));
  return b;
}

Tensor multi_head_cross_attention(const Tensor& query, const Tensor& keys_values, const AttentionBlock& blk,
                                  const AttentionOptions& opt) {
  if (blk.self_attention) throw ShapeError("cross-attention called with a self-attention block");
  check_cols(query, blk.query_dim, "cross-attention query");
  check_cols(keys_values, blk.kv_dim, "cross-attention keys/values");
  const Tensor qn = layer_norm(query, blk.ln_q_gain, blk.ln_q_bias);
  const Tensor kvn = opt.normalize_kv ? layer_norm(keys_values, blk.ln_kv_gain, blk.ln_kv_bias) : keys_values;
  const Tensor q = linear(qn, blk.wq, blk.bq);
  const Tensor k = linear(kvn, blk.wk, blk.bk);
  const Tensor v = linear(kvn, blk.wv, blk.bv);
  return finish_block(query, attend(q, k, v, blk.heads, blk.head_dim, opt), blk, opt);
}

Tensor multi_head_self_attention(const Tensor& latent, const AttentionBlock& blk, const AttentionOptions& opt) {
  if (!blk.self_attention) throw ShapeError("self-attention called with a cross-attention block");
  check_cols(latent, blk.query_dim, "self-attention input");
  const Tensor xn = layer_norm(latent, blk.ln_q_gain, blk.ln_q_bias);
  const Tensor q = linear(xn, blk.wq, blk.bq);
  const Tensor k = linear(xn, blk.wk, blk.bk);
  const Tensor v = linear(xn, blk.wv, blk.bv);
  return finish_block(latent, attend(q, k, v, blk.heads, blk.head_dim, opt), blk, opt);
}

GraphPerceiver::GraphPerceiver(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  latent_ = params_.add("latent", small_normal(c.latent_length, c.latent_dim, rng));
  encoder_ = AttentionBlock::create(params_, "encoder", c.latent_dim, c.input_dim, c.latent_dim, c.mhca_heads,
                                    c.mhca_head_dim, false, rng);
  for (std::size_t i = 0; i < c.depth; ++i) {
    self_blocks_.push_back(AttentionBlock::create(params_, "self" + std::to_string(i), c.latent_dim, c.latent_dim,
                                                  c.latent_dim, c.mhsa_heads, c.mhsa_head_dim, true, rng));
  }
  if (c.task == Task::Graph) learnable_query_ = params_.add("output_query", small_normal(1, c.query_dim, rng));
  const auto out = c.resolved_decoder_out_dim();
  decoder_ = AttentionBlock::create(params_, "decoder", c.query_dim, c.latent_dim, out, c.mhca_heads, c.mhca_head_dim,
                                    false, rng);
  if (c.has_logits()) {
    logits_w_ = params_.add("logits.w", glorot(out, c.num_classes, rng));
    logits_b_ = params_.add("logits.b", Tensor::zeros({c.num_classes}));
  }
}

ModelOutput GraphPerceiver::forward(const Tensor& input, const Tensor& query, const ForwardOptions& fo) const {
  const auto& c = config_;
  check_cols(input, c.input_dim, "input array");
  const std::size_t batch = fo.input_offsets.empty() ? 1 : fo.input_offsets.size() - 1;
  if (batch > 1 && c.task != Task::Graph) throw ShapeError("batched forward is only defined for the graph task");

  ModelOutput out;
  AttentionOptions base;
  if (fo.training && c.dropout > 0.0) {
    base.dropout = c.dropout;
    base.rng = fo.rng;
  }

  Segments enc_seg, self_seg, dec_seg;
  if (!fo.input_offsets.empty()) {
    enc_seg.key = fo.input_offsets;
    for (std::size_t b = 0; b <= batch; ++b) {
      enc_seg.query.push_back(b * c.latent_length);
      dec_seg.query.push_back(b);
    }
    self_seg.query = self_seg.key = dec_seg.key = enc_seg.query;
  }

  Tensor z = batch > 1 ? repeat_rows(latent_, batch) : latent_;
  {
    AttentionOptions opt = base;
    opt.normalize_kv = c.use_first_layer_norm;
    opt.segments = &enc_seg;
    if (fo.capture_attention) opt.capture = &out.encoder_attention;
    z = multi_head_cross_attention(z, input, encoder_, opt);
  }
  for (const auto& blk : self_blocks_) {
    AttentionOptions opt = base;
    opt.segments = &self_seg;
    z = multi_head_self_attention(z, blk, opt);
  }

  Tensor q;
  if (c.task == Task::Graph) {
    q = batch > 1 ? repeat_rows(learnable_query_, batch) : learnable_query_;
  } else {
    check_cols(query, c.query_dim, "output query");
    if (query.rows() != input.rows()) {
      throw ShapeError("output query has " + std::to_string(query.rows()) + " rows, input array has " +
                       std::to_string(input.rows()));
    }
    q = query;
  }
  AttentionOptions opt = base;
  opt.segments = &dec_seg;
  out.decoded = multi_head_cross_attention(q, z, decoder_, opt);
  if (c.has_logits()) out.logits = linear(out.decoded, logits_w_, logits_b_);
  return out;
}

Tensor decode_edges(const Tensor& decoded, std::span<const std::uint32_t> u, std::span<const std::uint32_t> v) {
  if (u.size() != v.size()) throw ShapeError("decode_edges: endpoint lists differ in length");
  const auto m = decoded.rows();
  std::vector<std::size_t> iu(u.begin(), u.end()), iv(v.begin(), v.end());
  for (std::size_t i = 0; i < iu.size(); ++i) {
    if (iu[i] >= m || iv[i] >= m) {
      throw ShapeError("decode_edges: pair (" + std::to_string(iu[i]) + "," + std::to_string(iv[i]) +
                       ") out of range for " + std::to_string(m) + " nodes");
    }
  }
  return sigmoid(row_dot(gather_rows(decoded, iu), gather_rows(decoded, iv)));
}

}  // namespace gpio
