#include "gpio/graph.hpp"

#include <algorithm>
#include <cmath>

#include "gpio/errors.hpp"

namespace gpio {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges) : num_nodes_(num_nodes), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.u >= num_nodes_ || e.v >= num_nodes_) {
      throw DatasetError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range for " +
                         std::to_string(num_nodes_) + " nodes");
    }
    if (e.u == e.v) throw DatasetError("self-loop on node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end()) {
    throw DatasetError("duplicate undirected edge (" + std::to_string(dup->u) + "," + std::to_string(dup->v) + ")");
  }
}

void Graph::set_features(Matrix features) {
  if (features.rows != num_nodes_) {
    throw DatasetError("feature matrix has " + std::to_string(features.rows) + " rows for " +
                       std::to_string(num_nodes_) + " nodes");
  }
  features_ = std::move(features);
}

void Graph::set_node_labels(std::vector<int> labels) {
  if (labels.size() != num_nodes_) {
    throw DatasetError("label vector has " + std::to_string(labels.size()) + " entries for " +
                       std::to_string(num_nodes_) + " nodes");
  }
  node_labels_ = std::move(labels);
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(num_nodes_, 0);
  for (const auto& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

SparseMatrix Graph::adjacency() const {
  SparseMatrix a;
  a.rows = a.cols = num_nodes_;
  a.row_ptr.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) {
    ++a.row_ptr[e.u + 1];
    ++a.row_ptr[e.v + 1];
  }
  for (std::size_t i = 0; i < num_nodes_; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
  a.col_idx.resize(2 * edges_.size());
  a.values.assign(2 * edges_.size(), 1.0);
  std::vector<std::size_t> fill(a.row_ptr.begin(), a.row_ptr.end() - 1);
  for (const auto& e : edges_) {
    a.col_idx[fill[e.u]++] = e.v;
    a.col_idx[fill[e.v]++] = e.u;
  }
  for (std::size_t r = 0; r < num_nodes_; ++r) {
    std::sort(a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[r]),
              a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[r + 1]));
  }
  return a;
}

bool Graph::has_edge(std::uint32_t a, std::uint32_t b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
}

Graph Graph::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != num_nodes_) throw ShapeError("permutation length does not match node count");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const auto& e : edges_) edges.push_back({static_cast<std::uint32_t>(perm[e.u]), static_cast<std::uint32_t>(perm[e.v])});
  Graph g(num_nodes_, std::move(edges));
  if (features_) g.set_features(permute_rows(*features_, perm));
  if (node_labels_) {
    std::vector<int> labels(num_nodes_);
    for (std::size_t i = 0; i < num_nodes_; ++i) labels[perm[i]] = (*node_labels_)[i];
    g.set_node_labels(std::move(labels));
  }
  g.graph_label_ = graph_label_;
  return g;
}

SparseMatrix normalized_adjacency(const Graph& g) {
  const auto n = g.num_nodes();
  auto adj = g.adjacency();
  auto deg = g.degrees();
  // 1/sqrt(d_r d_c) in one rounding; the product is symmetric in r and c.
  const auto weight = [&](std::size_t r, std::size_t c) {
    return 1.0 / std::sqrt(static_cast<double>(deg[r] + 1) * static_cast<double>(deg[c] + 1));
  };

  SparseMatrix p;
  p.rows = p.cols = n;
  p.row_ptr.assign(n + 1, 0);
  p.col_idx.reserve(adj.nnz() + n);
  p.values.reserve(adj.nnz() + n);
  for (std::size_t r = 0; r < n; ++r) {
    bool diag_done = false;
    for (std::size_t k = adj.row_ptr[r]; k <= adj.row_ptr[r + 1]; ++k) {
      const bool at_end = k == adj.row_ptr[r + 1];
      const auto c = at_end ? n : adj.col_idx[k];
      if (!diag_done && c > r) {
        p.col_idx.push_back(static_cast<std::uint32_t>(r));
        p.values.push_back(weight(r, r));
        diag_done = true;
      }
      if (at_end) break;
      p.col_idx.push_back(static_cast<std::uint32_t>(c));
      p.values.push_back(weight(r, c));
    }
    p.row_ptr[r + 1] = p.col_idx.size();
  }
  return p;
}

SparseMatrix random_walk_operator(const Graph& g) {
  auto r = g.adjacency();
  auto deg = g.degrees();
  for (std::size_t row = 0; row < r.rows; ++row)
    for (std::size_t k = r.row_ptr[row]; k < r.row_ptr[row + 1]; ++k) r.values[k] = 1.0 / static_cast<double>(deg[r.col_idx[k]]);
  return r;
}

}  // namespace gpio
