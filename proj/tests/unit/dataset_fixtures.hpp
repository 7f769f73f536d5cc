#pragma once

// Small on-disk datasets for experiment and CLI tests.

#include <filesystem>

#include "gpio/io.hpp"
#include "gpio/synthetic.hpp"

namespace gpio::testing {

inline std::filesystem::path write_citation_fixture(const std::filesystem::path& dir, std::size_t nodes = 120,
                                                    std::uint64_t seed = 7) {
  CitationLikeOptions o;
  o.num_nodes = nodes;
  o.num_classes = 3;
  o.num_features = 24;
  o.avg_degree = 5;
  PortableDataset ds{{"cite", nodes, o.num_features, o.num_classes, "node"}, make_citation_like(o, seed), std::nullopt};
  ds.fixed_split = make_fixed_split(ds.graph, 5, 30, 40, seed);
  save_portable(dir, ds);
  return dir;
}

// Path on two nodes, no features.
inline std::filesystem::path write_p2_fixture(const std::filesystem::path& dir) {
  PortableDataset ds{{"p2", 2, 0, 0, "node"}, Graph(2, {{0, 1}}), std::nullopt};
  save_portable(dir, ds);
  return dir;
}

inline std::filesystem::path write_cycles_fixture(const std::filesystem::path& dir, std::size_t graphs = 24) {
  auto ds = make_cycles_vs_trees(graphs, 5, 9, 11, 4);
  std::filesystem::create_directories(dir);
  save_tu(dir, "CYC", ds.graphs);
  return dir;
}

}  // namespace gpio::testing
