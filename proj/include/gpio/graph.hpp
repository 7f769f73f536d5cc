#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gpio/matrix.hpp"
#include "gpio/sparse.hpp"

namespace gpio {

/// Undirected edge in canonical order (u < v).
struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// Simple undirected graph with optional node features and labels.
///
/// Edges are canonicalized to u < v, sorted and unique. Self-loops are rejected;
/// the normalized operator adds them explicitly. Immutable once built, so a Graph
/// can be shared freely across threads.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t num_nodes, std::vector<Edge> edges);

  std::size_t num_nodes() const { return num_nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }

  const std::optional<Matrix>& features() const { return features_; }
  const std::optional<std::vector<int>>& node_labels() const { return node_labels_; }
  std::optional<int> graph_label() const { return graph_label_; }

  void set_features(Matrix features);
  void set_node_labels(std::vector<int> labels);
  void set_graph_label(int label) { graph_label_ = label; }

  std::vector<std::size_t> degrees() const;
  // Symmetric 0/1 adjacency in CSR form, built fresh on each call.
  SparseMatrix adjacency() const;
  bool has_edge(std::uint32_t a, std::uint32_t b) const;

  // Relabels node i as perm[i]; features and labels move with their nodes.
  Graph permuted(std::span<const std::size_t> perm) const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::optional<Matrix> features_;
  std::optional<std::vector<int>> node_labels_;
  std::optional<int> graph_label_;
};

/// D~^{-1/2} (A + I) D~^{-1/2}; symmetric, never materialized dense.
SparseMatrix normalized_adjacency(const Graph& g);

/// R = A D^{-1}. Columns of isolated nodes are all zero.
SparseMatrix random_walk_operator(const Graph& g);

}  // namespace gpio
