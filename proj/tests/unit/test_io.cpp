#include <algorithm>
#include <random>

#include "doctest.h"
#include "gpio/errors.hpp"
#include "gpio/io.hpp"
#include "graph_fixtures.hpp"
#include "temp_dir.hpp"

using namespace gpio;
using namespace gpio::testing;

namespace {

void write_minimal(const TempDir& d) {
  d.write("meta.json", R"({"name":"tiny","num_nodes":4,"num_features":2,"num_classes":2,"task":"node"})");
  d.write("edges.tsv", "0\t1\n1\t2\n");
  d.write("features.csv", "1,0\n0,1\n0.5,0.25\n-1e-3,2\n");
  d.write("labels.csv", "0\n1\n1\n0\n");
  d.write("splits.json", R"({"fixed":{"train":[0,1],"val":[2],"test":[3]}})");
}

}  // namespace

TEST_CASE("load_portable reads a complete directory") {
  TempDir d;
  write_minimal(d);
  auto ds = load_portable(d.path());
  CHECK(ds.meta.name == "tiny");
  CHECK(ds.graph.num_nodes() == 4);
  CHECK(ds.graph.num_edges() == 2);
  CHECK(ds.graph.degrees()[3] == 0);
  REQUIRE(ds.graph.features());
  CHECK((*ds.graph.features())(3, 0) == -1e-3);
  CHECK((*ds.graph.features())(2, 1) == 0.25);
  CHECK(*ds.graph.node_labels() == std::vector<int>{0, 1, 1, 0});
  REQUIRE(ds.fixed_split);
  CHECK(ds.fixed_split->test == std::vector<std::size_t>{3});
}

TEST_CASE("load_portable single isolated node with empty edge file") {
  TempDir d;
  d.write("meta.json", R"({"name":"one","num_nodes":1,"num_features":0,"num_classes":0,"task":"node"})");
  d.write("edges.tsv", "");
  auto ds = load_portable(d.path());
  CHECK(ds.graph.num_nodes() == 1);
  CHECK(ds.graph.num_edges() == 0);
  CHECK_FALSE(ds.graph.features());
  CHECK_FALSE(ds.fixed_split);
}

TEST_CASE("load_portable rejects malformed inputs") {
  auto expect_error = [](auto mutate, const char* fragment) {
    TempDir d;
    write_minimal(d);
    mutate(d);
    try {
      load_portable(d.path());
      FAIL("expected a load error mentioning " << fragment);
    } catch (const DatasetError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  expect_error([](const TempDir& d) { std::filesystem::remove(d.path() / "edges.tsv"); }, "edges.tsv");
  expect_error([](const TempDir& d) { d.write("edges.tsv", "0\t9\n"); }, "out of range");
  expect_error([](const TempDir& d) { d.write("edges.tsv", "1\t0\n"); }, "u < v");
  expect_error([](const TempDir& d) { d.write("edges.tsv", "0\t1\n0\t1\n"); }, "duplicate");
  expect_error([](const TempDir& d) { d.write("features.csv", "1,0\n0,1\n"); }, "rows");
  expect_error([](const TempDir& d) { d.write("features.csv", "1,0\n0,1\n1\n1,1\n"); }, "expected 2");
  expect_error([](const TempDir& d) { d.write("features.csv", "1,0\n0,x\n1,1\n1,1\n"); }, "cannot parse");
  expect_error([](const TempDir& d) { d.write("labels.csv", "0\n1\n2\n0\n"); }, "class id");
  expect_error([](const TempDir& d) { d.write("meta.json", R"({"name":"x","num_nodes":4})"); }, "num_features");
  expect_error([](const TempDir& d) { d.write("meta.json", "{"); }, "meta.json");
  expect_error([](const TempDir& d) { d.write("splits.json", R"({"fixed":{"train":[0],"val":[0],"test":[1]}})"); },
               "more than one");
  expect_error([](const TempDir& d) { d.write("splits.json", R"({"fixed":{"train":[0],"val":[7],"test":[1]}})"); },
               "outside");
}

TEST_CASE("portable save then load round-trips exactly") {
  std::mt19937_64 rng(4);
  auto g = random_graph(40, 0.1, rng);
  Matrix x(40, 3);
  std::normal_distribution<double> n;
  for (auto& v : x.data) v = n(rng);
  g.set_features(x);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[i] = i % 3;
  g.set_node_labels(labels);
  PortableDataset ds{{"rt", 40, 3, 3, "node"}, g, NodeSplit{{0, 1, 2}, {3, 4}, {5}, SplitMode::Fixed}};
  TempDir d;
  save_portable(d.path(), ds);
  auto back = load_portable(d.path());
  CHECK(std::equal(back.graph.edges().begin(), back.graph.edges().end(), g.edges().begin(), g.edges().end()));
  CHECK(*back.graph.features() == x);
  CHECK(*back.graph.node_labels() == labels);
  CHECK(back.fixed_split->val == ds.fixed_split->val);
}

TEST_CASE("load_tu minimal single-graph directory") {
  TempDir d;
  d.write("T_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n");
  d.write("T_graph_indicator.txt", "1\n1\n1\n");
  d.write("T_graph_labels.txt", "1\n");
  auto ds = load_tu(d.path(), "T", 1, 2);
  REQUIRE(ds.graphs.size() == 1);
  CHECK(ds.graphs[0].num_nodes() == 3);
  CHECK(ds.graphs[0].num_edges() == 2);
  CHECK_FALSE(ds.graphs[0].features());
  CHECK(ds.graphs[0].graph_label() == 0);
  CHECK(ds.folds.fold_of.empty());
}

TEST_CASE("load_tu re-indexes graphs, one-hot encodes node labels, maps graph labels") {
  TempDir d;
  // Graph 1: nodes 1-3 triangle with a self-loop; graph 2: nodes 4-5 one edge.
  d.write("T_A.txt", "1, 2\n2, 3\n1, 3\n3, 3\n4, 5\n5, 4\n");
  d.write("T_graph_indicator.txt", "1\n1\n1\n2\n2\n");
  d.write("T_graph_labels.txt", "-1\n1\n");
  d.write("T_node_labels.txt", "0\n2\n2\n5\n0\n");
  auto ds = load_tu(d.path(), "T", 1, 2);
  REQUIRE(ds.graphs.size() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.graph_label_values == std::vector<long>{-1, 1});
  CHECK(ds.graphs[0].graph_label() == 0);
  CHECK(ds.graphs[1].graph_label() == 1);
  CHECK(ds.graphs[0].num_edges() == 3);
  CHECK(ds.graphs[1].num_nodes() == 2);
  CHECK(ds.graphs[1].has_edge(0, 1));
  CHECK(ds.node_label_values == std::vector<long>{0, 2, 5});
  CHECK(*ds.graphs[1].features() == Matrix(2, 3, {0, 0, 1, 1, 0, 0}));
  CHECK(ds.folds.fold_of.size() == 2);
}

TEST_CASE("load_tu errors") {
  auto expect_error = [](const char* a, const char* ind, const char* labels, const char* fragment) {
    TempDir d;
    d.write("T_A.txt", a);
    d.write("T_graph_indicator.txt", ind);
    d.write("T_graph_labels.txt", labels);
    try {
      load_tu(d.path(), "T", 1, 2);
      FAIL("expected a load error mentioning " << fragment);
    } catch (const DatasetError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  expect_error("1, 9\n", "1\n1\n2\n2\n", "0\n1\n", "dangling");
  expect_error("1, 2\n", "1\n1\n3\n3\n", "0\n1\n", "jumps");
  expect_error("1, 2\n", "2\n2\n", "0\n", "start");
  expect_error("1, 3\n", "1\n1\n2\n2\n", "0\n1\n", "different graphs");
  expect_error("1, 2\n", "1\n1\n2\n2\n", "0\n", "labels for 2 graphs");
  TempDir empty;
  CHECK_THROWS_AS(load_tu(empty.path(), "T"), DatasetError);
}

TEST_CASE("TU load, save, load is idempotent") {
  std::mt19937_64 rng(17);
  std::vector<Graph> graphs;
  for (int i = 0; i < 25; ++i) {
    auto g = random_graph(3 + static_cast<std::uint32_t>(rng() % 12), 0.3, rng);
    Matrix x(g.num_nodes(), 4);
    for (std::size_t r = 0; r < x.rows; ++r) x(r, rng() % 4) = 1.0;
    g.set_features(x);
    g.set_graph_label(static_cast<int>(rng() % 2));
    graphs.push_back(g);
  }
  TempDir a, b;
  save_tu(a.path(), "R", graphs);
  auto first = load_tu(a.path(), "R");
  save_tu(b.path(), "R", first.graphs);
  auto second = load_tu(b.path(), "R");
  REQUIRE(first.graphs.size() == graphs.size());
  REQUIRE(second.graphs.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& g1 = first.graphs[i];
    const auto& g2 = second.graphs[i];
    CHECK(std::equal(g1.edges().begin(), g1.edges().end(), graphs[i].edges().begin(), graphs[i].edges().end()));
    CHECK(std::equal(g1.edges().begin(), g1.edges().end(), g2.edges().begin(), g2.edges().end()));
    CHECK(g1.graph_label() == graphs[i].graph_label());
    CHECK(g2.graph_label() == g1.graph_label());
    CHECK(*g2.features() == *g1.features());
  }
  CHECK(second.folds.fold_of == first.folds.fold_of);
}
