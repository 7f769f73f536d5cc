#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpio/graph.hpp"

namespace gpio {

enum class SplitMode { Fixed, Random };

SplitMode parse_split_mode(const std::string& s);
std::string to_string(SplitMode mode);

struct NodeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  SplitMode mode = SplitMode::Fixed;
};

// Throws DatasetError when the sets overlap or reference nodes >= num_nodes.
void validate_node_split(const NodeSplit& split, std::size_t num_nodes);

/// Fixed: returns `fixed` (the shipped Planetoid split) after validation.
/// Random: 20 training nodes per class, then 500 validation and 1000 test nodes
/// from the remainder, all drawn with `seed`.
NodeSplit make_node_split(const Graph& g, SplitMode mode, std::uint64_t seed,
                          const std::optional<NodeSplit>& fixed = std::nullopt);

struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
  // Same nodes, features and labels as the source graph; edges = train_pos only.
  Graph train_graph;
};

/// Partitions the edge list into train/val/test positives (fractions rounded to
/// nearest) and draws equally many non-edges of the full graph as val/test
/// negatives.
EdgeSplit make_edge_split(const Graph& g, std::uint64_t seed, double val_frac = 0.05, double test_frac = 0.10);

/// Uniformly samples `count` distinct node pairs that are not edges of g.
std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed);

/// Same, additionally avoiding every pair in `exclude`.
std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed,
                                        std::span<const Edge> exclude);

/// Stratified k-fold assignment over graphs.
struct FoldPlan {
  std::size_t k = 10;
  std::vector<std::size_t> fold_of;  // fold id per graph

  std::vector<std::size_t> fold(std::size_t f) const;
  // Protocol per fold f: test = fold f, val = fold f-1 (cyclic), train = rest.
  struct Partition {
    std::vector<std::size_t> train, val, test;
  };
  Partition partition(std::size_t f) const;
};

FoldPlan make_fold_plan(std::span<const int> labels, std::size_t k, std::uint64_t seed);

}  // namespace gpio
