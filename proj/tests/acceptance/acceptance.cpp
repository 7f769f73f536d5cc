// Acceptance checks: one PASS / FAIL / BLOCKED line per criterion.
//
//   gpio_acceptance --offline      self-contained checks (synthetic data only)
//   gpio_acceptance --benchmarks   trained-model thresholds on real datasets
//
// Benchmarks look datasets up under GPIO_DATA_DIR. A criterion whose data is
// missing reports BLOCKED; if every benchmark is blocked the exit code is 77 so
// ctest records a skip.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dataset_fixtures.hpp"
#include "dense_oracle.hpp"
#include "gpio/encodings.hpp"
#include "gpio/errors.hpp"
#include "gpio/experiment.hpp"
#include "model_checks.hpp"
#include "op_gradchecks.hpp"
#include "temp_dir.hpp"

#ifndef GPIO_BIN
#define GPIO_BIN "gpio"
#endif

namespace {

using namespace gpio;
using namespace gpio::testing;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Blocked };

struct Outcome {
  Status status;
  std::string detail;
};

struct Tally {
  int pass = 0, fail = 0, blocked = 0;

  void line(const std::string& name, const Outcome& o) {
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "BLOCKED";
    std::cout << tag << "  " << name << ": " << o.detail << std::endl;
    (o.status == Status::Pass ? pass : o.status == Status::Fail ? fail : blocked)++;
  }

  // Any exception becomes a failure line instead of aborting the remaining checks.
  template <class F>
  void run(const std::string& name, F&& check) {
    try {
      line(name, check());
    } catch (const std::exception& e) {
      line(name, {Status::Fail, std::string("threw: ") + e.what()});
    }
  }
};

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::Pass : Status::Fail, detail}; }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path only_run_dir(const fs::path& out) {
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory()) return e.path();
  throw std::runtime_error("no run directory under " + out.string());
}

// ---- offline ------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  double worst_op = 0;
  std::string worst_name = "-";
  for (int trial = 0; trial < 8; ++trial) {
    for (const auto& e : op_gradient_errors(rng)) {
      if (e.max_rel_error > worst_op) {
        worst_op = e.max_rel_error;
        worst_name = e.op;
      }
    }
  }
  double worst_model = 0;
  for (std::uint64_t seed : {7, 19, 31}) {
    auto r = model_gradient_errors(seed);
    for (const auto& c : {r.node, r.graph, r.link, r.node_at_init}) worst_model = std::max(worst_model, c.max_rel_error);
  }
  const double secs = seconds_since(t0);
  return verdict(worst_op < 1e-4 && worst_model < 1e-4 && secs < 60.0,
                 "ops max rel err " + fmt(worst_op) + " (" + worst_name + "), tiny model max rel err " +
                     fmt(worst_model) + ", limit 1e-4; " + fmt(secs, 3) + " s of 60 s");
}

Outcome rwpe_oracle() {
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<std::uint32_t> size(2, 50);
  std::uniform_real_distribution<double> prob(0.1, 0.5);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(size(rng), prob(rng), rng);
    const std::size_t t = 1 + static_cast<std::size_t>(trial % 16);
    worst = std::max(worst, max_abs_diff(compute_rwpe(g, t), dense_rwpe(g, t)));
  }
  const auto p2 = compute_rwpe(path_graph(2), 3);
  const auto k3 = compute_rwpe(complete_graph(3), 3);
  double fixture = max_abs_diff(p2, Matrix(2, 3, {0, 1, 0, 0, 1, 0}));
  fixture = std::max(fixture, max_abs_diff(k3, Matrix(3, 3, {0, .5, .25, 0, .5, .25, 0, .5, .25})));
  return verdict(worst <= 1e-10 && fixture <= 1e-10,
                 "50 graphs max abs err " + fmt(worst) + ", P2/K3 fixtures err " + fmt(fixture) + ", limit 1e-10");
}

Outcome smoothing_algebra() {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<std::uint32_t> size(2, 50);
  std::uniform_real_distribution<double> prob(0.05, 0.5), u(-1, 1);
  double semigroup = 0, appnp0 = 0, appnp1 = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(size(rng), prob(rng), rng);
    Matrix x(g.num_nodes(), 3);
    for (auto& v : x.data) v = u(rng);
    const std::size_t a = trial % 4, b = (trial / 4) % 5;
    semigroup = std::max(semigroup, max_abs_diff(sgc_smooth(x, g, a + b), sgc_smooth(sgc_smooth(x, g, a), g, b)));
    appnp0 = std::max(appnp0, max_abs_diff(appnp_smooth(x, g, a + b, 0.0), sgc_smooth(x, g, a + b)));
    appnp1 = std::max(appnp1, max_abs_diff(appnp_smooth(x, g, a + b, 1.0), x));
  }
  return verdict(std::max({semigroup, appnp0, appnp1}) <= 1e-10,
                 "sgc semigroup " + fmt(semigroup) + ", appnp a=0 vs sgc " + fmt(appnp0) + ", appnp a=1 vs identity " +
                     fmt(appnp1) + ", limit 1e-10");
}

Outcome permutation_properties() {
  auto w = permutation_worst(9, 20);
  return verdict(std::max({w.graph, w.node, w.link}) <= 1e-8,
                 "20 permutations: graph invariance " + fmt(w.graph) + ", node equivariance " + fmt(w.node) +
                     ", link equivariance " + fmt(w.link) + ", limit 1e-8");
}

// Times one node-task forward pass on M and 2M input rows; N stays fixed.
Outcome linear_scaling() {
  ModelConfig c;
  c.task = Task::Node;
  c.input_dim = 64;
  c.query_dim = 64;
  c.latent_length = 16;
  c.latent_dim = 32;
  c.mhca_heads = 2;
  c.mhca_head_dim = 32;
  c.mhsa_heads = 2;
  c.mhsa_head_dim = 32;
  c.num_classes = 7;
  GraphPerceiver model(c, 5);
  std::mt19937_64 rng(77);
  const std::size_t m = 2708;  // Cora-sized
  auto small_in = random_tensor({m, 64}, rng), small_q = random_tensor({m, 64}, rng);
  auto large_in = random_tensor({2 * m, 64}, rng), large_q = random_tensor({2 * m, 64}, rng);
  auto time_forward = [&](const Tensor& in, const Tensor& q) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      auto out = model.forward(in, q);
      best = std::min(best, seconds_since(t0));
      if (out.logits->shape()[0] != in.shape()[0]) throw std::runtime_error("unexpected output shape");
    }
    return best;
  };
  time_forward(small_in, small_q);
  time_forward(large_in, large_q);
  double total = 0;
  for (int trial = 0; trial < 20; ++trial) total += time_forward(large_in, large_q) / time_forward(small_in, small_q);
  const double ratio = total / 20;
  return verdict(ratio >= 1.6 && ratio <= 2.6,
                 "mean time ratio 2M/M " + fmt(ratio) + " over 20 trials at M=" + std::to_string(m) + ", N=16; bounds [1.6, 2.6]");
}

const char* kTinyModel =
    R"("model": {"latent_length": 4, "latent_dim": 8, "mhca_heads": 2, "mhca_head_dim": 4, "mhsa_heads": 1, "mhsa_head_dim": 4})";

Outcome determinism(const std::string& gpio_bin) {
  TempDir tmp;
  const auto data = write_citation_fixture(tmp.path() / "cite");
  tmp.write("c.json", std::string("{\"dataset\": {\"path\": \"") + data.string() + "\"}, " + kTinyModel +
                          R"(, "schedule": {"max_epochs": 20, "patience": 20, "learning_rate": 0.005}})");
  auto train = [&](const std::string& out) {
    return shell(gpio_bin + " train --config " + (tmp.path() / "c.json").string() + " --seed 11 --out " +
                 (tmp.path() / out).string() + " >/dev/null 2>&1");
  };
  const int a = train("a"), b = train("b");
  if (a != 0 || b != 0) return {Status::Fail, "gpio train exited " + std::to_string(a) + " and " + std::to_string(b)};
  const auto ma = slurp(only_run_dir(tmp.path() / "a") / "metrics.json");
  const auto mb = slurp(only_run_dir(tmp.path() / "b") / "metrics.json");
  return verdict(!ma.empty() && ma == mb, ma == mb ? "two invocations wrote byte-identical metrics.json ("
                                                         + std::to_string(ma.size()) + " bytes)"
                                                   : "metrics.json differs between invocations");
}

Outcome attention_export(const std::string& gpio_bin) {
  TempDir tmp;
  const std::size_t latents = 4;
  struct Case {
    fs::path data;
    std::string task;
    std::string flags;
  };
  std::vector<Case> cases = {{write_citation_fixture(tmp.path() / "cite", 90), "node", ""},
                             {write_cycles_fixture(tmp.path() / "CYC"), "graph", " --graph 3"}};
  double worst = 0;
  std::size_t rows_seen = 0;
  std::string problems;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto dir = tmp.path() / ("run" + std::to_string(i));
    tmp.write("c" + std::to_string(i) + ".json",
              "{\"task\": \"" + c.task + "\", \"dataset\": {\"path\": \"" + c.data.string() + "\"}, " + kTinyModel +
                  R"(, "split": {"folds": 4}, "encoding": {"pe": "rwpe", "t": 4, "smoothing": {"method": "none", "L": 0}},)" +
                  R"( "schedule": {"max_epochs": 3, "patience": 3}})");
    if (shell(gpio_bin + " train --config " + (tmp.path() / ("c" + std::to_string(i) + ".json")).string() + " --out " +
              dir.string() + " >/dev/null 2>&1") != 0)
      return {Status::Fail, c.task + " training for the export failed"};
    const auto ckpt = only_run_dir(dir) / "model.ckpt";
    const auto out = tmp.path() / ("x" + std::to_string(i));
    if (shell(gpio_bin + " export-attention --checkpoint " + ckpt.string() + " --dataset " + c.data.string() + c.flags +
              " --out " + out.string() + " >/dev/null 2>&1") != 0)
      return {Status::Fail, c.task + " export-attention failed"};
    std::istringstream in(slurp(out / "attention.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string cell;
      double s = 0;
      while (std::getline(ls, cell, ',')) s += std::stod(cell);
      worst = std::max(worst, std::abs(s - 1.0));
      ++rows;
    }
    rows_seen += rows;
    if (rows != latents) problems += "; " + c.task + " export has " + std::to_string(rows) + " rows";
  }
  return verdict(problems.empty() && worst <= 1e-9,
                 std::to_string(rows_seen) + " rows over node and graph exports, " + std::to_string(latents) +
                     " per export expected, max |row sum - 1| " + fmt(worst) + ", limit 1e-9" + problems);
}

// ---- benchmarks ---------------------------------------------------------------

struct Bench {
  fs::path work;
  std::size_t node_seeds = 10, link_seeds = 5;

  std::optional<std::string> missing(std::initializer_list<const char*> names) const {
    std::string out;
    for (const char* n : names) {
      try {
        resolve_dataset(n, "", "");
      } catch (const DatasetError&) {
        out += std::string(out.empty() ? "" : ", ") + n;
      }
    }
    if (out.empty()) return std::nullopt;
    const char* dir = std::getenv("GPIO_DATA_DIR");
    return "dataset " + out + " not found under GPIO_DATA_DIR=" + (dir ? dir : "(unset)");
  }

  std::vector<std::uint64_t> seeds(std::size_t n) const {
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(2025 + i);
    return s;
  }

  // Trains the named defaults with `patch` merged in; returns the summary of the
  // single grid point and the longest single-run wall time.
  std::pair<json, double> train(Task task, const std::string& name, const json& patch, std::size_t n_seeds,
                                const std::string& tag) const {
    json raw = default_config(task, name);
    raw["dataset"]["name"] = name;
    raw.merge_patch(patch);
    raw["seeds"] = seeds(n_seeds);
    raw["output_dir"] = (work / tag).string();
    auto summary = run_all(expand_config(raw));
    const auto& point = summary.at("grid_points").at(0);
    double longest = 0;
    for (const auto& r : point.at("runs")) {
      auto timing = json::parse(slurp(work / tag / r.at("dir").get<std::string>() / "timing.json"));
      longest = std::max(longest, timing.at("seconds").get<double>());
    }
    return {point, longest};
  }
};

Outcome cora_node(const Bench& b) {
  if (auto m = b.missing({"cora"})) return {Status::Blocked, *m};
  auto [main, longest] = b.train(Task::Node, "cora", json::object(), b.node_seeds, "cora-node");
  auto [l0, t0] = b.train(Task::Node, "cora", {{"encoding", {{"smoothing", {{"L", 0}}}}}}, b.node_seeds, "cora-node-L0");
  auto [l2, t2] = b.train(Task::Node, "cora", {{"encoding", {{"smoothing", {{"L", 2}}}}}}, b.node_seeds, "cora-node-L2");
  const double acc = main.at("test_accuracy_mean"), a0 = l0.at("test_accuracy_mean"), a2 = l2.at("test_accuracy_mean");
  const double slowest = std::max({longest, t0, t2});
  return verdict(acc >= 0.79 && slowest <= 600.0 && a0 < 0.65 && 0.65 < a2,
                 "mean test acc " + fmt(acc) + " over " + std::to_string(b.node_seeds) + " seeds (>= 0.79), " +
                     "slowest run " + fmt(slowest, 3) + " s (<= 600), ablation L=0 " + fmt(a0) + " < 0.65 < L=2 " +
                     fmt(a2));
}

Outcome citeseer_node(const Bench& b) {
  if (auto m = b.missing({"citeseer"})) return {Status::Blocked, *m};
  auto [s, longest] = b.train(Task::Node, "citeseer", json::object(), b.node_seeds, "citeseer-node");
  const double acc = s.at("test_accuracy_mean");
  return verdict(acc >= 0.66, "mean test acc " + fmt(acc) + " over " + std::to_string(b.node_seeds) + " seeds (>= 0.66)");
}

Outcome link_prediction(const Bench& b) {
  if (auto m = b.missing({"cora", "citeseer"})) return {Status::Blocked, *m};
  auto [cora, t1] = b.train(Task::Link, "cora", {{"encoding", {{"smoothing", {{"method", "sgc"}, {"L", 1}}}}}},
                            b.link_seeds, "cora-link");
  auto [cite, t2] = b.train(Task::Link, "citeseer", {{"encoding", {{"smoothing", {{"method", "sgc"}, {"L", 2}}}}}},
                            b.link_seeds, "citeseer-link");
  const double auc = cora.at("test_auc_mean"), ap = cora.at("test_ap_mean"), cauc = cite.at("test_auc_mean");
  return verdict(auc >= 0.92 && ap >= 0.92 && cauc >= 0.93,
                 "cora AUC " + fmt(auc) + " AP " + fmt(ap) + " over " + std::to_string(b.link_seeds) +
                     " seeds (>= 0.92); citeseer L=2 AUC " + fmt(cauc) + " (>= 0.93)");
}

Outcome graph_classification(const Bench& b) {
  if (auto m = b.missing({"MUTAG", "PROTEINS"})) return {Status::Blocked, *m};
  auto [rw, t1] = b.train(Task::Graph, "mutag", json::object(), 1, "mutag-rwpe");
  auto [fo, t2] = b.train(Task::Graph, "mutag", {{"encoding", {{"pe", "fourier"}}}}, 1, "mutag-fourier");
  auto [no, t3] = b.train(Task::Graph, "mutag", {{"encoding", {{"pe", "none"}}}}, 1, "mutag-none");
  auto [pr, t4] = b.train(Task::Graph, "proteins", json::object(), 1, "proteins");
  const double m_rw = rw.at("test_accuracy_mean"), m_fo = fo.at("test_accuracy_mean"), m_no = no.at("test_accuracy_mean");
  const double p = pr.at("test_accuracy_mean");
  return verdict(m_rw >= 0.75 && p >= 0.70 && m_rw > m_fo && m_fo > m_no,
                 "MUTAG 10-fold mean " + fmt(m_rw) + " (>= 0.75), PROTEINS " + fmt(p) + " (>= 0.70), MUTAG pe rwpe " +
                     fmt(m_rw) + " > fourier " + fmt(m_fo) + " > none " + fmt(m_no));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph Perceiver IO acceptance checks"};
  bool offline = false, benchmarks = false;
  std::string gpio_bin = GPIO_BIN;
  std::string work;
  Bench bench;
  app.add_flag("--offline", offline, "Run the self-contained checks");
  app.add_flag("--benchmarks", benchmarks, "Run the dataset benchmarks");
  app.add_option("--gpio", gpio_bin, "Path to the gpio executable");
  app.add_option("--work", work, "Directory for benchmark runs (default: a temporary directory)");
  app.add_option("--node-seeds", bench.node_seeds, "Seeds per node-classification config");
  app.add_option("--link-seeds", bench.link_seeds, "Seeds per link-prediction config");
  CLI11_PARSE(app, argc, argv);
  if (!offline && !benchmarks) offline = benchmarks = true;

  Tally tally;
  if (offline) {
    tally.run("gradient integrity", gradient_integrity);
    tally.run("rwpe oracle", rwpe_oracle);
    tally.run("smoothing algebra", smoothing_algebra);
    tally.run("permutation properties", permutation_properties);
    tally.run("linear scaling", linear_scaling);
    tally.run("determinism", [&] { return determinism(gpio_bin); });
    tally.run("attention export", [&] { return attention_export(gpio_bin); });
  }

  int bench_ran = 0;
  if (benchmarks) {
    std::optional<TempDir> scratch;
    if (work.empty()) {
      scratch.emplace();
      bench.work = scratch->path();
    } else {
      bench.work = work;
    }
    const int before = tally.blocked;
    tally.run("cora node classification", [&] { return cora_node(bench); });
    tally.run("citeseer node classification", [&] { return citeseer_node(bench); });
    tally.run("link prediction", [&] { return link_prediction(bench); });
    tally.run("graph classification", [&] { return graph_classification(bench); });
    bench_ran = 4 - (tally.blocked - before);
  }

  std::cout << tally.pass << " passed, " << tally.fail << " failed, " << tally.blocked << " blocked" << std::endl;
  if (tally.fail > 0) return 1;
  if (benchmarks && !offline && bench_ran == 0) return 77;
  return 0;
}
