#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpio/graph.hpp"
#include "gpio/splits.hpp"

namespace gpio {

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

/// One LF-terminated line per row, no header.
void write_delimited(const std::filesystem::path& path, const Matrix& m, char sep = ',');

struct PortableMeta {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::string task = "node";  // node | link
};

struct PortableDataset {
  PortableMeta meta;
  Graph graph;
  std::optional<NodeSplit> fixed_split;
};

/// Reads a portable dataset directory:
///   meta.json, edges.tsv (required), features.csv (when num_features > 0),
///   labels.csv (when num_classes > 0), splits.json (optional).
/// Every count is cross-checked against meta.json; violations throw DatasetError.
PortableDataset load_portable(const std::filesystem::path& dir);

void save_portable(const std::filesystem::path& dir, const PortableDataset& ds);

struct TuDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  // Raw label values in the order they were mapped to 0..E-1.
  std::vector<long> graph_label_values;
  // Raw node-label values, position = one-hot column. Empty when absent.
  std::vector<long> node_label_values;
  FoldPlan folds;
};

/// Reads the TU plain-text layout: <name>_A.txt (1-indexed "a, b" pairs),
/// <name>_graph_indicator.txt, <name>_graph_labels.txt and optionally
/// <name>_node_labels.txt. Node ids are re-indexed per graph, reversed
/// duplicates and self-loops are dropped, node labels become one-hot features.
TuDataset load_tu(const std::filesystem::path& dir, const std::string& name, std::uint64_t seed = 2025,
                  std::size_t k = 10);

/// Writes graphs back in TU layout. Graph labels are written as stored
/// (0..E-1); node labels are recovered from one-hot features when every row is
/// one-hot.
void save_tu(const std::filesystem::path& dir, const std::string& name, const std::vector<Graph>& graphs);

}  // namespace gpio
