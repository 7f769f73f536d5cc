#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpio/matrix.hpp"
#include "gpio/task.hpp"
#include "gpio/tensor.hpp"

namespace gpio {

struct ModelConfig {
  Task task = Task::Node;
  std::size_t input_dim = 0;  // C + t
  std::size_t query_dim = 0;  // D_q: C for node/link, E for graph
  std::size_t latent_length = 64;  // N
  std::size_t latent_dim = 64;     // D
  std::size_t mhca_heads = 1;
  std::size_t mhca_head_dim = 64;
  std::size_t mhsa_heads = 1;
  std::size_t mhsa_head_dim = 64;
  std::size_t depth = 1;
  std::size_t num_classes = 0;      // E; unused for link
  std::size_t decoder_out_dim = 0;  // 0 selects the per-task default
  bool use_first_layer_norm = true;
  double dropout = 0.0;

  bool has_logits() const { return task != Task::Link; }
  // decoder_out_dim with the default resolved.
  std::size_t resolved_decoder_out_dim() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Named, ordered collection of trainable tensors.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t num_scalars() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// Contiguous row ranges that may only attend within themselves. offsets has
/// B+1 entries, offsets[0] = 0 and offsets[B] = total rows. Empty = one segment.
struct Segments {
  std::vector<std::size_t> query;
  std::vector<std::size_t> key;

  std::size_t count() const { return query.empty() ? 1 : query.size() - 1; }
};

/// Weights of one pre-norm attention block: Q/K/V projections, per-head
/// scaled dot-product attention, output projection, residual (when the output
/// width equals the query width), then a GELU MLP with its own residual.
struct AttentionBlock {
  std::size_t query_dim = 0, kv_dim = 0, out_dim = 0, heads = 1, head_dim = 1;
  bool self_attention = false;
  Tensor ln_q_gain, ln_q_bias;
  Tensor ln_kv_gain, ln_kv_bias;  // cross-attention only
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln_mlp_gain, ln_mlp_bias, w1, b1, w2, b2;

  static AttentionBlock create(ParameterStore& store, const std::string& prefix, std::size_t query_dim,
                               std::size_t kv_dim, std::size_t out_dim, std::size_t heads, std::size_t head_dim,
                               bool self_attention, std::mt19937_64& rng);
};

struct AttentionOptions {
  bool normalize_kv = true;
  // One entry per key row (1 = may be attended). Empty = all allowed.
  std::span<const std::uint8_t> key_mask;
  const Segments* segments = nullptr;
  // When set, receives one head-averaged weight matrix per segment.
  std::vector<Matrix>* capture = nullptr;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

Tensor multi_head_cross_attention(const Tensor& query, const Tensor& keys_values, const AttentionBlock& block,
                                  const AttentionOptions& options = {});
Tensor multi_head_self_attention(const Tensor& latent, const AttentionBlock& block,
                                 const AttentionOptions& options = {});

struct ModelOutput {
  Tensor decoded;
  std::optional<Tensor> logits;
  // Head-averaged encoder cross-attention, one N x M_b matrix per graph.
  std::vector<Matrix> encoder_attention;
};

struct ForwardOptions {
  bool capture_attention = false;
  // Row offsets of each graph inside a stacked input (graph task batches).
  std::vector<std::size_t> input_offsets;
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

class GraphPerceiver {
 public:
  GraphPerceiver(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  /// input: M x input_dim (stacked over graphs for graph batches).
  /// query: M x query_dim for node/link; ignored for graph (the learnable query
  /// is used, one row per graph).
  ModelOutput forward(const Tensor& input, const Tensor& query, const ForwardOptions& options = {}) const;

  const Tensor& latent() const { return latent_; }
  const Tensor& learnable_query() const { return learnable_query_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  Tensor latent_;
  Tensor learnable_query_;
  AttentionBlock encoder_;
  std::vector<AttentionBlock> self_blocks_;
  AttentionBlock decoder_;
  Tensor logits_w_, logits_b_;
};

/// sigma(z_u . z_v) per pair, as a column.
Tensor decode_edges(const Tensor& decoded, std::span<const std::uint32_t> u, std::span<const std::uint32_t> v);

/// Checkpoint file: the 8 bytes "GPIOCKPT", a little-endian uint64 header
/// length, a JSON header {"model": config, "extra": ..., "tensors": [{name,
/// shape, offset}]}, then every tensor as raw little-endian float64.
void save_checkpoint(const std::filesystem::path& path, const GraphPerceiver& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  GraphPerceiver model;
  nlohmann::json extra;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gpio
