#include "gpio/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

#include "gpio/errors.hpp"

namespace gpio {

Graph make_citation_like(const CitationLikeOptions& opt, std::uint64_t seed) {
  if (opt.num_classes == 0 || opt.num_nodes < opt.num_classes) throw ConfigError("synthetic graph needs nodes >= classes >= 1");
  std::mt19937_64 rng(seed);
  const auto n = opt.num_nodes;
  std::vector<int> labels(n);
  std::vector<std::vector<std::uint32_t>> members(opt.num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % opt.num_classes);
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<std::uint32_t>(i));
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  for (auto& m : members) m.clear();
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<std::uint32_t>(i));

  const auto target = static_cast<std::size_t>(opt.avg_degree * static_cast<double>(n) / 2.0);
  std::unordered_set<std::uint64_t> seen;
  std::vector<Edge> edges;
  std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(n - 1));
  std::bernoulli_distribution within(opt.homophily);
  std::size_t attempts = 0;
  while (edges.size() < target && attempts++ < 50 * target + 1000) {
    const auto a = any(rng);
    std::uint32_t b;
    if (within(rng)) {
      const auto& m = members[static_cast<std::size_t>(labels[a])];
      b = m[std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng)];
    } else {
      b = any(rng);
    }
    if (a == b || !seen.insert(edge_key(a, b)).second) continue;
    edges.push_back({std::min(a, b), std::max(a, b)});
  }
  Graph g(n, std::move(edges));

  Matrix x(n, opt.num_features);
  const std::size_t block = std::max<std::size_t>(1, opt.num_features / opt.num_classes);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = static_cast<std::size_t>(labels[i]) * block;
    for (std::size_t j = 0; j < opt.num_features; ++j) {
      const bool own = j >= lo && j < lo + block;
      if (u(rng) < (own ? opt.topic_rate : opt.noise_rate)) x(i, j) = 1.0;
    }
  }
  g.set_features(std::move(x));
  g.set_node_labels(std::move(labels));
  return g;
}

NodeSplit make_fixed_split(const Graph& g, std::size_t per_class, std::size_t num_val, std::size_t num_test,
                           std::uint64_t seed) {
  if (!g.node_labels()) throw DatasetError("fixed split needs node labels");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(g.num_nodes());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  NodeSplit s;
  s.mode = SplitMode::Fixed;
  std::map<int, std::size_t> taken;
  std::vector<std::size_t> rest;
  for (auto i : order) {
    auto& t = taken[(*g.node_labels())[i]];
    if (t < per_class) {
      ++t;
      s.train.push_back(i);
    } else {
      rest.push_back(i);
    }
  }
  if (rest.size() < num_val + num_test) throw DatasetError("graph too small for the requested split sizes");
  s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(num_val));
  s.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(num_val),
                rest.begin() + static_cast<std::ptrdiff_t>(num_val + num_test));
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

TuDataset make_cycles_vs_trees(std::size_t num_graphs, std::size_t min_nodes, std::size_t max_nodes,
                               std::uint64_t seed, std::size_t k) {
  if (min_nodes < 4 || max_nodes < min_nodes) throw ConfigError("synthetic graphs need 4 <= min_nodes <= max_nodes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(min_nodes, max_nodes);
  std::uniform_int_distribution<int> node_label(0, 2);
  TuDataset ds;
  ds.name = "CYCLES_TREES";
  ds.num_classes = 2;
  ds.graph_label_values = {0, 1};
  ds.node_label_values = {0, 1, 2};
  std::vector<int> labels;
  for (std::size_t gi = 0; gi < num_graphs; ++gi) {
    const int cls = static_cast<int>(gi % 2);
    const auto n = static_cast<std::uint32_t>(size(rng));
    std::vector<Edge> edges;
    std::unordered_set<std::uint64_t> seen;
    const auto push = [&](std::uint32_t a, std::uint32_t b) {
      if (a != b && seen.insert(edge_key(a, b)).second) edges.push_back({std::min(a, b), std::max(a, b)});
    };
    if (cls == 0) {
      for (std::uint32_t i = 0; i < n; ++i) push(i, (i + 1) % n);
      std::uniform_int_distribution<std::uint32_t> any(0, n - 1);
      push(any(rng), any(rng));
    } else {
      for (std::uint32_t i = 1; i < n; ++i) push(i, std::uniform_int_distribution<std::uint32_t>(0, i - 1)(rng));
    }
    Graph g(n, std::move(edges));
    Matrix x(n, 3);
    for (std::uint32_t i = 0; i < n; ++i) x(i, static_cast<std::size_t>(node_label(rng))) = 1.0;
    g.set_features(std::move(x));
    g.set_graph_label(cls);
    labels.push_back(cls);
    ds.graphs.push_back(std::move(g));
  }
  ds.folds.k = k;
  if (num_graphs >= k) ds.folds = make_fold_plan(labels, k, seed);
  return ds;
}

}  // namespace gpio
