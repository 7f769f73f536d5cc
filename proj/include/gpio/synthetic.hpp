#pragma once

#include <cstddef>
#include <cstdint>

#include "gpio/graph.hpp"
#include "gpio/io.hpp"

namespace gpio {

/// Planted-partition graph with sparse binary bag-of-words features, shaped
/// like a citation network. Each class owns a block of "topic" feature columns
/// that its nodes switch on more often; edges are mostly within class.
struct CitationLikeOptions {
  std::size_t num_nodes = 600;
  std::size_t num_classes = 4;
  std::size_t num_features = 120;
  double avg_degree = 4.0;
  double homophily = 0.8;    // fraction of edges within class
  double topic_rate = 0.08;  // probability a node switches on a column of its class block
  double noise_rate = 0.02;  // probability of any other column
};

Graph make_citation_like(const CitationLikeOptions& opt, std::uint64_t seed);

/// Fixed split with per_class training nodes per class, then val/test counts.
NodeSplit make_fixed_split(const Graph& g, std::size_t per_class, std::size_t num_val, std::size_t num_test,
                           std::uint64_t seed);

/// Two-class graph set: class 0 graphs are cycles with random chords, class 1
/// are random trees. Node labels (3 values) are drawn independently of class,
/// so only structure separates the classes.
TuDataset make_cycles_vs_trees(std::size_t num_graphs, std::size_t min_nodes, std::size_t max_nodes,
                               std::uint64_t seed, std::size_t k = 10);

}  // namespace gpio
