#include "gpio/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gpio/errors.hpp"
#include "gpio/losses.hpp"
#include "gpio/optim.hpp"

namespace gpio {

using nlohmann::json;

json EncodingConfig::to_json() const {
  json j = {{"pe", to_string(pe)},
            {"t", t},
            {"smoothing", to_string(smoothing.method)},
            {"L", smoothing.L}};
  j["alpha"] = smoothing.alpha ? json(*smoothing.alpha) : json(nullptr);
  return j;
}

void TrainSchedule::validate() const {
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0 || patience > max_epochs) throw ConfigError("patience must lie in [1, max_epochs]");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

json TrainSchedule::to_json() const {
  return {{"max_epochs", max_epochs}, {"patience", patience},        {"eval_every", eval_every},
          {"seed", seed},             {"learning_rate", learning_rate}, {"weight_decay", weight_decay},
          {"batch_size", batch_size}};
}

json RunResult::to_json(bool include_timing) const {
  json j = {{"task", to_string(task)},
            {"seed", seed},
            {"val_metric", val_metric_name},
            {"best_epoch", best_epoch},
            {"best_val", best_val},
            {"epochs_run", epochs_run},
            {"test", test},
            {"final_train_loss", train_loss.empty() ? json(nullptr) : json(train_loss.back())}};
  if (fold) j["fold"] = *fold;
  if (include_timing) j["seconds"] = seconds;
  return j;
}

std::string RunResult::curves_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_metric,val_loss\n";
  std::size_t k = 0;
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    os << e + 1 << ',' << train_loss[e] << ',';
    if (k < eval_epochs.size() && eval_epochs[k] == e + 1) {
      os << val_metric[k] << ',';
      if (k < val_loss.size()) os << val_loss[k];
      ++k;
    } else {
      os << ',';
    }
    os << '\n';
  }
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::vector<double>> snapshot(const ParameterStore& store) {
  std::vector<std::vector<double>> s;
  s.reserve(store.size());
  for (const auto& t : store.tensors()) s.emplace_back(t.data().begin(), t.data().end());
  return s;
}

void restore(ParameterStore& store, const std::vector<std::vector<double>>& s) {
  for (std::size_t i = 0; i < store.size(); ++i) std::copy(s[i].begin(), s[i].end(), store.tensors()[i].mutable_data().begin());
}

double checked_loss(const Tensor& loss, std::size_t epoch) {
  const double v = loss.item();
  if (!std::isfinite(v)) throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
  return v;
}

// Tracks the best validation point: higher metric wins, lower loss breaks ties.
struct BestTracker {
  bool any = false;
  double metric = 0.0, loss = 0.0;
  std::size_t epoch = 0;
  std::vector<std::vector<double>> params;

  bool offer(double m, double l, std::size_t e, const ParameterStore& store) {
    const bool better = !any || m > metric || (m == metric && l < loss);
    if (!better) return false;
    any = true;
    metric = m;
    loss = l;
    epoch = e;
    params = snapshot(store);
    return true;
  }
};

ModelConfig fill(ModelConfig hp, Task task, std::size_t input_dim, std::size_t query_dim, std::size_t classes) {
  hp.task = task;
  hp.input_dim = input_dim;
  hp.query_dim = query_dim;
  hp.num_classes = classes;
  return hp;
}

}  // namespace

// ---- node -------------------------------------------------------------------

NodeTask prepare_node_task(const Graph& g, const NodeSplit& split, const EncodingConfig& enc,
                           std::size_t num_classes) {
  if (!g.node_labels()) throw DatasetError("node classification needs node labels");
  if (!g.features()) throw DatasetError("node classification needs node features");
  validate_node_split(split, g.num_nodes());
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DatasetError("node split has an empty train, val or test set");
  }
  NodeTask t;
  t.input = build_input_array(g, enc.pe, enc.t);
  t.query = build_output_query(Task::Node, g, enc.smoothing, g.features()->cols).values;
  t.labels = *g.node_labels();
  t.split = split;
  t.num_classes = num_classes;
  for (int l : t.labels)
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) throw DatasetError("node label outside [0, num_classes)");
  return t;
}

Trained train_node(const NodeTask& data, ModelConfig hp, const TrainSchedule& schedule) {
  schedule.validate();
  const auto start = Clock::now();
  auto cfg = fill(std::move(hp), Task::Node, data.input.cols, data.query.cols, data.num_classes);
  auto model = std::make_shared<GraphPerceiver>(cfg, schedule.seed);
  Adam opt(model->parameters().tensors(), schedule.learning_rate, schedule.weight_decay);
  std::mt19937_64 rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
  const Tensor input = Tensor::from(data.input);
  const Tensor query = Tensor::from(data.query);

  RunResult r;
  r.task = Task::Node;
  r.seed = schedule.seed;
  r.val_metric_name = "accuracy";
  BestTracker best;
  ForwardOptions train_fo;
  train_fo.training = true;
  train_fo.rng = &rng;

  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    auto out = model->forward(input, query, train_fo);
    Tensor loss = node_ce_loss(*out.logits, data.labels, data.split.train);
    r.train_loss.push_back(checked_loss(loss, epoch));
    backward(loss);
    opt.step();
    opt.zero_grad();
    r.epochs_run = epoch;

    if (epoch % schedule.eval_every != 0 && epoch != schedule.max_epochs) continue;
    NoGradGuard ng;
    auto eval = model->forward(input, query);
    const Matrix logits = eval.logits->to_matrix();
    const double acc = accuracy(logits, data.labels, data.split.val);
    const double vloss = node_ce_loss(*eval.logits, data.labels, data.split.val).item();
    r.eval_epochs.push_back(epoch);
    r.val_metric.push_back(acc);
    r.val_loss.push_back(vloss);
    best.offer(acc, vloss, epoch, model->parameters());
    if (epoch - best.epoch >= schedule.patience) break;
  }

  restore(model->parameters(), best.params);
  {
    NoGradGuard ng;
    auto eval = model->forward(input, query);
    r.test["accuracy"] = accuracy(eval.logits->to_matrix(), data.labels, data.split.test);
  }
  r.best_epoch = best.epoch;
  r.best_val = best.metric;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::move(r), std::move(model)};
}

// ---- link -------------------------------------------------------------------

LinkTask prepare_link_task(const Graph& g, const EncodingConfig& enc, std::uint64_t split_seed) {
  if (!g.features()) throw DatasetError("link prediction needs node features for the output query");
  LinkTask t;
  t.split = make_edge_split(g, split_seed);
  t.input = build_input_array(t.split.train_graph, enc.pe, enc.t);
  t.query = build_output_query(Task::Link, t.split.train_graph, enc.smoothing, g.features()->cols).values;
  return t;
}

namespace {

struct PairLists {
  std::vector<std::uint32_t> u, v;
};

PairLists pairs(const std::vector<Edge>& edges) {
  PairLists p;
  p.u.reserve(edges.size());
  p.v.reserve(edges.size());
  for (auto e : edges) {
    p.u.push_back(e.u);
    p.v.push_back(e.v);
  }
  return p;
}

struct LinkScores {
  double auc, ap;
};

LinkScores score_links(const Tensor& decoded, const std::vector<Edge>& pos, const std::vector<Edge>& neg) {
  auto pp = pairs(pos), pn = pairs(neg);
  auto sp = decode_edges(decoded, pp.u, pp.v);
  auto sn = decode_edges(decoded, pn.u, pn.v);
  // AP breaks ties by input order, so alternate negative/positive: a model with
  // constant scores then gets AP equal to the positive rate, not 1.
  std::vector<double> scores;
  std::vector<int> labels;
  const auto ps = sp.data(), ns = sn.data();
  for (std::size_t i = 0; i < std::max(ps.size(), ns.size()); ++i) {
    if (i < ns.size()) {
      scores.push_back(ns[i]);
      labels.push_back(0);
    }
    if (i < ps.size()) {
      scores.push_back(ps[i]);
      labels.push_back(1);
    }
  }
  return {roc_auc(scores, labels), average_precision(scores, labels)};
}

}  // namespace

Trained train_link(const LinkTask& data, ModelConfig hp, const TrainSchedule& schedule) {
  schedule.validate();
  const auto start = Clock::now();
  auto cfg = fill(std::move(hp), Task::Link, data.input.cols, data.query.cols, 0);
  auto model = std::make_shared<GraphPerceiver>(cfg, schedule.seed);
  Adam opt(model->parameters().tensors(), schedule.learning_rate, schedule.weight_decay);
  std::mt19937_64 rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
  const Tensor input = Tensor::from(data.input);
  const Tensor query = Tensor::from(data.query);
  const auto& split = data.split;
  const auto train_pairs = pairs(split.train_pos);

  RunResult r;
  r.task = Task::Link;
  r.seed = schedule.seed;
  r.val_metric_name = "auc";
  BestTracker best;
  ForwardOptions train_fo;
  train_fo.training = true;
  train_fo.rng = &rng;

  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    // Fresh negatives every epoch, drawn from a stream fixed by the run seed.
    const auto neg = pairs(sample_negative_edges(split.train_graph, split.train_pos.size(), rng()));
    auto out = model->forward(input, query, train_fo);
    Tensor loss = link_recon_loss(decode_edges(out.decoded, train_pairs.u, train_pairs.v),
                                  decode_edges(out.decoded, neg.u, neg.v));
    r.train_loss.push_back(checked_loss(loss, epoch));
    backward(loss);
    opt.step();
    opt.zero_grad();
    r.epochs_run = epoch;

    if (epoch % schedule.eval_every != 0 && epoch != schedule.max_epochs) continue;
    NoGradGuard ng;
    auto eval = model->forward(input, query);
    const auto s = score_links(eval.decoded, split.val_pos, split.val_neg);
    r.eval_epochs.push_back(epoch);
    r.val_metric.push_back(s.auc);
    best.offer(s.auc, -s.ap, epoch, model->parameters());
    if (epoch - best.epoch >= schedule.patience) break;
  }

  restore(model->parameters(), best.params);
  {
    NoGradGuard ng;
    auto eval = model->forward(input, query);
    const auto s = score_links(eval.decoded, split.test_pos, split.test_neg);
    r.test["auc"] = s.auc;
    r.test["ap"] = s.ap;
  }
  r.best_epoch = best.epoch;
  r.best_val = best.metric;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::move(r), std::move(model)};
}

// ---- graph ------------------------------------------------------------------

GraphTask prepare_graph_task(const TuDataset& ds, const EncodingConfig& enc) {
  GraphTask t;
  t.num_classes = ds.num_classes;
  t.folds = ds.folds;
  t.inputs.reserve(ds.graphs.size());
  for (const auto& g : ds.graphs) {
    if (g.num_nodes() == 0) throw DatasetError("graph classification cannot encode an empty graph");
    t.inputs.push_back(build_input_array(g, enc.pe, enc.t));
    t.labels.push_back(*g.graph_label());
  }
  return t;
}

namespace {

struct Batch {
  Tensor input;
  std::vector<std::size_t> offsets;
  std::vector<int> labels;
};

Batch make_batch(const GraphTask& data, std::span<const std::size_t> ids) {
  Batch b;
  const std::size_t cols = data.inputs.at(ids.front()).cols;
  std::size_t rows = 0;
  b.offsets.push_back(0);
  for (auto i : ids) {
    rows += data.inputs[i].rows;
    b.offsets.push_back(rows);
    b.labels.push_back(data.labels[i]);
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (auto i : ids) values.insert(values.end(), data.inputs[i].data.begin(), data.inputs[i].data.end());
  b.input = Tensor::from({rows, cols}, std::move(values));
  return b;
}

struct GraphEval {
  double accuracy, loss;
};

GraphEval evaluate_graphs(const GraphPerceiver& model, const GraphTask& data, const std::vector<std::size_t>& ids,
                          std::size_t batch_size) {
  NoGradGuard ng;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < ids.size(); s += batch_size) {
    std::span<const std::size_t> chunk(ids.data() + s, std::min(batch_size, ids.size() - s));
    auto b = make_batch(data, chunk);
    ForwardOptions fo;
    fo.input_offsets = b.offsets;
    auto out = model.forward(b.input, Tensor(), fo);
    const auto logits = out.logits->to_matrix();
    std::vector<std::size_t> all(chunk.size());
    std::iota(all.begin(), all.end(), 0);
    correct += static_cast<std::size_t>(std::lround(accuracy(logits, b.labels, all) * static_cast<double>(chunk.size())));
    loss_sum += graph_ce_loss(*out.logits, b.labels).item() * static_cast<double>(chunk.size());
  }
  const double n = static_cast<double>(ids.size());
  return {static_cast<double>(correct) / n, loss_sum / n};
}

}  // namespace

Trained train_graph_fold(const GraphTask& data, std::size_t fold, ModelConfig hp, const TrainSchedule& schedule) {
  schedule.validate();
  if (data.folds.fold_of.size() != data.inputs.size()) {
    throw DatasetError("fold plan does not cover the dataset (too few graphs for k folds?)");
  }
  const auto part = data.folds.partition(fold);
  if (part.train.empty() || part.val.empty() || part.test.empty()) {
    throw DatasetError("fold " + std::to_string(fold) + " has an empty train, val or test set");
  }
  const auto start = Clock::now();
  const std::uint64_t seed = schedule.seed + fold;
  auto cfg = fill(std::move(hp), Task::Graph, data.inputs.front().cols, data.num_classes, data.num_classes);
  auto model = std::make_shared<GraphPerceiver>(cfg, seed);
  Adam opt(model->parameters().tensors(), schedule.learning_rate, schedule.weight_decay);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  RunResult r;
  r.task = Task::Graph;
  r.seed = schedule.seed;
  r.fold = fold;
  r.val_metric_name = "accuracy";
  BestTracker best;
  std::vector<std::size_t> order = part.train;

  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < order.size(); s += schedule.batch_size) {
      std::span<const std::size_t> chunk(order.data() + s, std::min(schedule.batch_size, order.size() - s));
      auto b = make_batch(data, chunk);
      ForwardOptions fo;
      fo.input_offsets = b.offsets;
      fo.training = true;
      fo.rng = &rng;
      auto out = model->forward(b.input, Tensor(), fo);
      Tensor loss = graph_ce_loss(*out.logits, b.labels);
      epoch_loss += checked_loss(loss, epoch) * static_cast<double>(chunk.size());
      backward(loss);
      opt.step();
      opt.zero_grad();
    }
    r.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    r.epochs_run = epoch;

    if (epoch % schedule.eval_every != 0 && epoch != schedule.max_epochs) continue;
    const auto v = evaluate_graphs(*model, data, part.val, schedule.batch_size);
    r.eval_epochs.push_back(epoch);
    r.val_metric.push_back(v.accuracy);
    r.val_loss.push_back(v.loss);
    best.offer(v.accuracy, v.loss, epoch, model->parameters());
    if (epoch - best.epoch >= schedule.patience) break;
  }

  restore(model->parameters(), best.params);
  r.test["accuracy"] = evaluate_graphs(*model, data, part.test, schedule.batch_size).accuracy;
  r.best_epoch = best.epoch;
  r.best_val = best.metric;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::move(r), std::move(model)};
}

CrossValResult train_graph(const GraphTask& data, ModelConfig hp, const TrainSchedule& schedule) {
  CrossValResult cv;
  std::vector<double> accs;
  for (std::size_t f = 0; f < data.folds.k; ++f) {
    auto t = train_graph_fold(data, f, hp, schedule);
    accs.push_back(t.result.test.at("accuracy"));
    cv.folds.push_back(std::move(t.result));
    cv.last_model = std::move(t.model);
  }
  cv.accuracy = mean_std(accs);
  return cv;
}

json CrossValResult::to_json(bool include_timing) const {
  json folds_json = json::array();
  for (const auto& f : folds) folds_json.push_back(f.to_json(include_timing));
  return {{"test_accuracy_mean", accuracy.mean}, {"test_accuracy_std", accuracy.std}, {"folds", folds_json}};
}

}  // namespace gpio
