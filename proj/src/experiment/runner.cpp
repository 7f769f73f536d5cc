#include <chrono>
#include <ctime>
#include <fstream>
#include <map>

#include "gpio/encodings.hpp"
#include "gpio/errors.hpp"
#include "gpio/experiment.hpp"
#include "gpio/metrics.hpp"

namespace gpio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

PortableDataset load_single(const DatasetRef& ref) {
  if (ref.format != DatasetFormat::Portable)
    throw ConfigError("node and link tasks need a portable dataset, got TU directory " + ref.path.string());
  return load_portable(ref.path);
}

TuDataset load_multi(const DatasetRef& ref, std::size_t k, std::uint64_t seed) {
  if (ref.format != DatasetFormat::Tu)
    throw ConfigError("the graph task needs a TU dataset, got portable directory " + ref.path.string());
  return load_tu(ref.path, ref.tu_prefix, seed, k);
}

json run_echo(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto j = cfg.to_json();
  j["seeds"] = json::array({seed});
  return j;
}

// Rebuilds the run config stored in a checkpoint.
struct Restored {
  Checkpoint ckpt;
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
};

Restored restore(const fs::path& checkpoint) {
  Restored r{load_checkpoint(checkpoint), {}, 0};
  const auto& extra = r.ckpt.extra;
  if (!extra.contains("config") || !extra.contains("seed"))
    throw DatasetError("checkpoint " + checkpoint.string() + " carries no run config");
  auto configs = expand_config(extra.at("config"));
  r.cfg = configs.at(0);
  r.seed = extra.at("seed").get<std::uint64_t>();
  return r;
}

void check_dims(const ModelConfig& m, std::size_t input_cols, std::size_t query_cols) {
  if (input_cols != m.input_dim)
    throw ShapeError("dataset input width " + std::to_string(input_cols) + " does not match checkpoint input_dim " +
                     std::to_string(m.input_dim));
  if (m.task != Task::Graph && query_cols != m.query_dim)
    throw ShapeError("dataset query width " + std::to_string(query_cols) + " does not match checkpoint query_dim " +
                     std::to_string(m.query_dim));
}

// Inputs and query exactly as training built them for one portable graph.
std::pair<Matrix, Matrix> single_graph_arrays(const Restored& r, const Graph& g) {
  if (r.cfg.task == Task::Link) {
    auto t = prepare_link_task(g, r.cfg.encoding, r.seed);
    return {std::move(t.input), std::move(t.query)};
  }
  auto input = build_input_array(g, r.cfg.encoding.pe, r.cfg.encoding.t);
  auto query = build_output_query(Task::Node, g, r.cfg.encoding.smoothing, g.features() ? g.features()->cols : 0);
  return {std::move(input), std::move(query.values)};
}

std::vector<int> node_classes(const Graph& g, const TuDataset* tu) {
  if (g.node_labels()) return *g.node_labels();
  // TU node labels live in the features as one-hot rows.
  if (tu && !tu->node_label_values.empty() && g.features()) {
    const auto& x = *g.features();
    std::vector<int> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < std::min(x.cols, tu->node_label_values.size()); ++j)
        if (x(i, j) > x(i, best)) best = j;
      out[i] = static_cast<int>(tu->node_label_values.at(best));
    }
    return out;
  }
  return {};
}

void write_column(const fs::path& p, const std::vector<int>& v) {
  std::string text;
  for (int x : v) text += std::to_string(x) + "\n";
  write_text(p, text);
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  const auto ref = resolve_dataset(cfg.dataset_name, cfg.dataset_path, cfg.dataset_format);
  std::vector<RunRecord> records;

  std::optional<PortableDataset> single;
  if (cfg.task != Task::Graph) single = load_single(ref);

  for (const auto seed : cfg.seeds) {
    RunRecord rec;
    rec.seed = seed;
    rec.dir = cfg.output_dir / (ref.name + "-" + to_string(cfg.task) + "-" + std::to_string(seed) + "-" + cfg.hash(seed));
    fs::create_directories(rec.dir);

    const auto echo = run_echo(cfg, seed);
    auto schedule = cfg.schedule;
    schedule.seed = seed;
    std::shared_ptr<GraphPerceiver> model;
    json result;
    double seconds = 0.0;

    if (cfg.task == Task::Node) {
      const auto& g = single->graph;
      if (!g.node_labels() || single->meta.num_classes == 0) throw DatasetError("node task needs labels.csv");
      if (cfg.split_mode == SplitMode::Fixed && !single->fixed_split)
        throw DatasetError("split.mode is fixed but " + ref.path.string() + " has no splits.json");
      auto split = make_node_split(g, cfg.split_mode, seed, single->fixed_split);
      auto task = prepare_node_task(g, split, cfg.encoding, single->meta.num_classes);
      auto trained = train_node(task, cfg.model, schedule);
      result = trained.result.to_json();
      seconds = trained.result.seconds;
      write_text(rec.dir / "curves.csv", trained.result.curves_csv());
      model = trained.model;
    } else if (cfg.task == Task::Link) {
      auto task = prepare_link_task(single->graph, cfg.encoding, seed);
      auto trained = train_link(task, cfg.model, schedule);
      result = trained.result.to_json();
      seconds = trained.result.seconds;
      write_text(rec.dir / "curves.csv", trained.result.curves_csv());
      model = trained.model;
    } else {
      auto ds = load_multi(ref, cfg.folds, seed);
      auto task = prepare_graph_task(ds, cfg.encoding);
      task.folds = make_fold_plan(task.labels, cfg.folds, seed);
      auto cv = train_graph(task, cfg.model, schedule);
      result = cv.to_json();
      for (const auto& f : cv.folds) {
        seconds += f.seconds;
        write_text(rec.dir / ("curves_fold" + std::to_string(*f.fold) + ".csv"), f.curves_csv());
      }
      model = cv.last_model;
    }

    rec.metrics = {{"config", echo}, {"result", result}};
    write_json(rec.dir / "config.json", echo);
    write_json(rec.dir / "metrics.json", rec.metrics);
    write_json(rec.dir / "timing.json", {{"seconds", seconds}, {"finished_at", utc_now()}});
    json extra = {{"config", echo}, {"seed", seed}};
    if (cfg.task == Task::Graph) extra["fold"] = cfg.folds - 1;
    save_checkpoint(rec.dir / "model.ckpt", *model, extra);
    if (cfg.export_attention) export_attention(rec.dir / "model.ckpt", ref, rec.dir);
    if (cfg.export_embeddings) export_embeddings(rec.dir / "model.ckpt", ref, rec.dir);
    records.push_back(std::move(rec));
  }
  return records;
}

json summarize(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs) {
  json per_run = json::array();
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : runs) {
    const auto& res = r.metrics.at("result");
    json test;
    if (res.contains("test_accuracy_mean")) {
      test["accuracy"] = res.at("test_accuracy_mean");
    } else {
      test = res.at("test");
    }
    for (const auto& [k, v] : test.items()) values[k].push_back(v.get<double>());
    per_run.push_back({{"seed", r.seed}, {"dir", r.dir.filename().string()}, {"test", test}});
  }
  json s = {{"config", cfg.to_json()}, {"runs", per_run}};
  for (const auto& [k, v] : values) {
    const auto ms = mean_std(v);
    s["test_" + k + "_mean"] = ms.mean;
    s["test_" + k + "_std"] = ms.std;
  }
  return s;
}

json run_all(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ConfigError("no configurations to run");
  json summary = {{"grid_points", json::array()}};
  for (const auto& cfg : configs) summary["grid_points"].push_back(summarize(cfg, run_experiment(cfg)));
  fs::create_directories(configs.front().output_dir);
  write_json(configs.front().output_dir / "summary.json", summary);
  return summary;
}

std::vector<fs::path> encode_dataset(const EncodeRequest& req) {
  const bool want_pe = req.pe != PeKind::None;
  const bool want_smooth = req.smoothing.method != SmoothingMethod::None;
  if (!want_pe && !want_smooth) throw ConfigError("encode: nothing requested (pe is none and smoothing is none)");
  req.smoothing.validate();

  std::vector<Graph> graphs;
  if (req.dataset.format == DatasetFormat::Portable) {
    graphs.push_back(load_portable(req.dataset.path).graph);
  } else {
    if (want_smooth) throw ConfigError("encode: smoothing applies to portable single-graph datasets only");
    graphs = load_tu(req.dataset.path, req.dataset.tu_prefix, 2025, 2).graphs;
  }
  fs::create_directories(req.out_dir);
  std::vector<fs::path> written;
  if (want_pe) {
    // TU graphs are stacked in file order.
    std::size_t rows = 0;
    for (const auto& g : graphs) rows += g.num_nodes();
    Matrix all(rows, req.t);
    std::size_t r0 = 0;
    for (const auto& g : graphs) {
      auto pe = req.pe == PeKind::Rwpe ? compute_rwpe(g, req.t) : fourier_pe(g, req.t);
      std::copy(pe.data.begin(), pe.data.end(), all.data.begin() + static_cast<std::ptrdiff_t>(r0 * req.t));
      r0 += g.num_nodes();
    }
    written.push_back(req.out_dir / (req.pe == PeKind::Rwpe ? "rwpe.csv" : "fourier.csv"));
    write_delimited(written.back(), all);
  }
  if (want_smooth) {
    const auto& g = graphs.front();
    if (!g.features()) throw DatasetError("encode: smoothing requested but the dataset has no features");
    written.push_back(req.out_dir / "smoothed.csv");
    write_delimited(written.back(), smooth(*g.features(), g, req.smoothing));
  }
  return written;
}

std::vector<fs::path> export_attention(const fs::path& checkpoint, const DatasetRef& dataset, const fs::path& out_dir,
                                       std::size_t graph_index) {
  const auto r = restore(checkpoint);
  const auto& model = r.ckpt.model;
  ForwardOptions opt;
  opt.capture_attention = true;
  Matrix attention;
  std::vector<int> classes;
  if (r.cfg.task == Task::Graph) {
    auto ds = load_multi(dataset, r.cfg.folds, r.seed);
    if (graph_index >= ds.graphs.size())
      throw DatasetError("graph index " + std::to_string(graph_index) + " out of range for " +
                         std::to_string(ds.graphs.size()) + " graphs");
    const auto& g = ds.graphs[graph_index];
    auto input = build_input_array(g, r.cfg.encoding.pe, r.cfg.encoding.t);
    check_dims(model.config(), input.cols, 0);
    NoGradGuard guard;
    auto out = model.forward(Tensor::from(input), Tensor(), opt);
    attention = out.encoder_attention.at(0);
    classes = node_classes(g, &ds);
  } else {
    auto ds = load_single(dataset);
    auto [input, query] = single_graph_arrays(r, ds.graph);
    check_dims(model.config(), input.cols, query.cols);
    NoGradGuard guard;
    auto out = model.forward(Tensor::from(input), Tensor::from(query), opt);
    attention = out.encoder_attention.at(0);
    classes = node_classes(ds.graph, nullptr);
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written{out_dir / "attention.csv"};
  write_delimited(written.back(), attention);
  if (!classes.empty()) {
    written.push_back(out_dir / "attention_classes.csv");
    write_column(written.back(), classes);
  }
  return written;
}

fs::path export_embeddings(const fs::path& checkpoint, const DatasetRef& dataset, const fs::path& out_dir) {
  const auto r = restore(checkpoint);
  const auto& model = r.ckpt.model;
  Matrix rows;
  std::vector<int> labels;
  NoGradGuard guard;
  if (r.cfg.task == Task::Graph) {
    auto ds = load_multi(dataset, r.cfg.folds, r.seed);
    for (const auto& g : ds.graphs) {
      auto input = build_input_array(g, r.cfg.encoding.pe, r.cfg.encoding.t);
      check_dims(model.config(), input.cols, 0);
      auto decoded = model.forward(Tensor::from(input), Tensor()).decoded.to_matrix();
      if (rows.rows == 0) rows = Matrix(0, decoded.cols);
      rows.data.insert(rows.data.end(), decoded.data.begin(), decoded.data.end());
      ++rows.rows;
      labels.push_back(g.graph_label().value_or(-1));
    }
  } else {
    auto ds = load_single(dataset);
    auto [input, query] = single_graph_arrays(r, ds.graph);
    check_dims(model.config(), input.cols, query.cols);
    rows = model.forward(Tensor::from(input), Tensor::from(query)).decoded.to_matrix();
    labels = ds.graph.node_labels().value_or(std::vector<int>(rows.rows, -1));
  }
  std::string text;
  for (std::size_t i = 0; i < rows.rows; ++i) {
    for (std::size_t j = 0; j < rows.cols; ++j) text += format_double(rows(i, j)) + "\t";
    text += std::to_string(labels[i]) + "\n";
  }
  fs::create_directories(out_dir);
  const auto path = out_dir / "embeddings.tsv";
  write_text(path, text);
  return path;
}

DatasetReport check_dataset(const DatasetRef& dataset) {
  DatasetReport rep;
  if (dataset.format == DatasetFormat::Portable) {
    auto ds = load_portable(dataset.path);
    const auto& g = ds.graph;
    rep.json = {{"format", "portable"},
                {"name", ds.meta.name},
                {"task", ds.meta.task},
                {"num_nodes", g.num_nodes()},
                {"num_edges", g.num_edges()},
                {"num_features", ds.meta.num_features},
                {"num_classes", ds.meta.num_classes}};
    if (ds.fixed_split) {
      rep.json["split"] = {{"train", ds.fixed_split->train.size()},
                           {"val", ds.fixed_split->val.size()},
                           {"test", ds.fixed_split->test.size()}};
    }
  } else {
    auto ds = load_tu(dataset.path, dataset.tu_prefix, 2025, 2);
    std::size_t nodes = 0, edges = 0;
    for (const auto& g : ds.graphs) {
      nodes += g.num_nodes();
      edges += g.num_edges();
    }
    rep.json = {{"format", "tu"},
                {"name", ds.name},
                {"num_graphs", ds.graphs.size()},
                {"num_nodes", nodes},
                {"num_edges", edges},
                {"num_classes", ds.num_classes},
                {"num_node_labels", ds.node_label_values.size()}};
  }
  for (const auto& [k, v] : rep.json.items()) {
    rep.text += k + ": " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  }
  return rep;
}

}  // namespace gpio
