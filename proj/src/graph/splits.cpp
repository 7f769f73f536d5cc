#include "gpio/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include "gpio/errors.hpp"

namespace gpio {

SplitMode parse_split_mode(const std::string& s) {
  if (s == "fixed") return SplitMode::Fixed;
  if (s == "random") return SplitMode::Random;
  throw ConfigError("unknown split mode '" + s + "' (expected fixed|random)");
}

std::string to_string(SplitMode mode) { return mode == SplitMode::Fixed ? "fixed" : "random"; }

void validate_node_split(const NodeSplit& split, std::size_t num_nodes) {
  std::vector<std::uint8_t> used(num_nodes, 0);
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (auto i : *part) {
      if (i >= num_nodes) throw DatasetError("split index " + std::to_string(i) + " out of range");
      if (used[i]) throw DatasetError("node " + std::to_string(i) + " appears in more than one split set");
      used[i] = 1;
    }
  }
}

NodeSplit make_node_split(const Graph& g, SplitMode mode, std::uint64_t seed, const std::optional<NodeSplit>& fixed) {
  if (!g.node_labels()) throw DatasetError("node split requires node labels");
  if (mode == SplitMode::Fixed) {
    if (!fixed) throw DatasetError("fixed split requested but the dataset ships no splits.json");
    validate_node_split(*fixed, g.num_nodes());
    NodeSplit out = *fixed;
    out.mode = SplitMode::Fixed;
    return out;
  }

  constexpr std::size_t per_class = 20, num_val = 500, num_test = 1000;
  const auto& labels = *g.node_labels();
  std::mt19937_64 rng(seed);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  NodeSplit split;
  split.mode = SplitMode::Random;
  std::vector<std::uint8_t> taken(g.num_nodes(), 0);
  for (auto& [cls, nodes] : by_class) {
    std::shuffle(nodes.begin(), nodes.end(), rng);
    for (std::size_t i = 0; i < std::min(per_class, nodes.size()); ++i) {
      split.train.push_back(nodes[i]);
      taken[nodes[i]] = 1;
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    if (!taken[i]) rest.push_back(i);
  if (rest.size() < num_val + num_test) {
    throw DatasetError("random split needs " + std::to_string(num_val + num_test) + " non-training nodes, graph has " +
                       std::to_string(rest.size()));
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  split.val.assign(rest.begin(), rest.begin() + num_val);
  split.test.assign(rest.begin() + num_val, rest.begin() + num_val + num_test);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

std::vector<Edge> sample_non_edges(std::size_t n, std::size_t count, std::mt19937_64& rng,
                                   const std::unordered_set<std::uint64_t>& forbidden) {
  if (count == 0) return {};
  const std::uint64_t all_pairs = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t available = all_pairs - std::min<std::uint64_t>(all_pairs, forbidden.size());
  if (count > available) {
    throw DatasetError("cannot sample " + std::to_string(count) + " negative edges; only " +
                       std::to_string(available) + " non-edges exist");
  }
  std::vector<Edge> out;
  out.reserve(count);
  if (2 * count > available) {
    // Dense regime: enumerate every candidate and take a uniform subset.
    std::vector<Edge> candidates;
    for (std::uint32_t u = 0; u < n; ++u)
      for (std::uint32_t v = u + 1; v < n; ++v)
        if (!forbidden.count(edge_key(u, v))) candidates.push_back({u, v});
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(count);
    return candidates;
  }
  std::unordered_set<std::uint64_t> chosen;
  std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(n - 1));
  while (out.size() < count) {
    auto a = node(rng), b = node(rng);
    if (a == b) continue;
    const auto key = edge_key(a, b);
    if (forbidden.count(key) || !chosen.insert(key).second) continue;
    out.push_back({std::min(a, b), std::max(a, b)});
  }
  return out;
}

std::unordered_set<std::uint64_t> edge_set(std::span<const Edge> edges) {
  std::unordered_set<std::uint64_t> s;
  s.reserve(edges.size() * 2);
  for (const auto& e : edges) s.insert(edge_key(e.u, e.v));
  return s;
}

}  // namespace

std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed) {
  return sample_negative_edges(g, count, seed, {});
}

std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, std::uint64_t seed,
                                        std::span<const Edge> exclude) {
  std::mt19937_64 rng(seed);
  auto forbidden = edge_set(g.edges());
  for (const auto& e : exclude) forbidden.insert(edge_key(e.u, e.v));
  return sample_non_edges(g.num_nodes(), count, rng, forbidden);
}

EdgeSplit make_edge_split(const Graph& g, std::uint64_t seed, double val_frac, double test_frac) {
  const auto m = g.num_edges();
  if (m < 10) throw DatasetError("edge split needs at least 10 edges, graph has " + std::to_string(m));
  if (val_frac < 0 || test_frac < 0 || val_frac + test_frac >= 1.0) {
    throw DatasetError("edge split fractions must be nonnegative and sum below 1");
  }
  const auto n_val = static_cast<std::size_t>(std::lround(val_frac * static_cast<double>(m)));
  const auto n_test = static_cast<std::size_t>(std::lround(test_frac * static_cast<double>(m)));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= m) {
    throw DatasetError("graph with " + std::to_string(m) + " edges is too small for the requested fractions");
  }

  std::mt19937_64 rng(seed);
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::shuffle(edges.begin(), edges.end(), rng);

  EdgeSplit split;
  split.val_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val),
                        edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), edges.end());
  std::sort(split.train_pos.begin(), split.train_pos.end());

  auto forbidden = edge_set(g.edges());
  split.val_neg = sample_non_edges(g.num_nodes(), n_val, rng, forbidden);
  for (const auto& e : split.val_neg) forbidden.insert(edge_key(e.u, e.v));
  split.test_neg = sample_non_edges(g.num_nodes(), n_test, rng, forbidden);

  split.train_graph = Graph(g.num_nodes(), split.train_pos);
  if (g.features()) split.train_graph.set_features(*g.features());
  if (g.node_labels()) split.train_graph.set_node_labels(*g.node_labels());
  return split;
}

std::vector<std::size_t> FoldPlan::fold(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == f) out.push_back(i);
  return out;
}

FoldPlan::Partition FoldPlan::partition(std::size_t f) const {
  if (f >= k) throw ShapeError("fold index " + std::to_string(f) + " out of range for " + std::to_string(k) + " folds");
  const std::size_t val_fold = (f + k - 1) % k;
  Partition p;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == f) {
      p.test.push_back(i);
    } else if (fold_of[i] == val_fold) {
      p.val.push_back(i);
    } else {
      p.train.push_back(i);
    }
  }
  return p;
}

FoldPlan make_fold_plan(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ShapeError("fold plan needs k >= 2");
  if (labels.size() < k) {
    throw DatasetError("cannot build " + std::to_string(k) + " folds over " + std::to_string(labels.size()) + " graphs");
  }
  std::mt19937_64 rng(seed);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(labels.size(), 0);
  // Dealing round-robin with a running counter keeps every class within one
  // graph of its stratified share and fold sizes within one of each other.
  std::size_t next = 0;
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) plan.fold_of[i] = next++ % k;
  }
  return plan;
}

}  // namespace gpio
