#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpio/encodings.hpp"
#include "gpio/io.hpp"
#include "gpio/metrics.hpp"
#include "gpio/model.hpp"
#include "gpio/splits.hpp"

namespace gpio {

struct EncodingConfig {
  PeKind pe = PeKind::Rwpe;
  std::size_t t = 4;
  SmoothingConfig smoothing;

  nlohmann::json to_json() const;
};

struct TrainSchedule {
  std::size_t max_epochs = 500;
  std::size_t patience = 100;
  std::size_t eval_every = 1;
  std::uint64_t seed = 2025;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;  // graph task only

  void validate() const;
  nlohmann::json to_json() const;
};

struct RunResult {
  Task task = Task::Node;
  std::uint64_t seed = 0;
  std::optional<std::size_t> fold;
  std::string val_metric_name;       // accuracy | auc
  std::vector<double> train_loss;    // one entry per epoch run
  std::vector<std::size_t> eval_epochs;  // 1-based epochs at which validation ran
  std::vector<double> val_metric;
  std::vector<double> val_loss;      // empty for link
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::map<std::string, double> test;  // evaluated once, with the best-validation parameters
  std::size_t epochs_run = 0;
  double seconds = 0.0;

  /// Timing is left out unless asked, so equal runs serialize identically.
  nlohmann::json to_json(bool include_timing = false) const;
  /// Columns: epoch,train_loss,val_metric,val_loss (blank where not evaluated).
  std::string curves_csv() const;
};

struct Trained {
  RunResult result;
  std::shared_ptr<GraphPerceiver> model;  // parameters restored to the best-validation epoch
};

// ---- node classification --------------------------------------------------

struct NodeTask {
  Matrix input;
  Matrix query;
  std::vector<int> labels;
  NodeSplit split;
  std::size_t num_classes = 0;
};

NodeTask prepare_node_task(const Graph& g, const NodeSplit& split, const EncodingConfig& enc,
                           std::size_t num_classes);

/// hp supplies the architecture hyperparameters; task, dims and classes are
/// filled in from the data.
Trained train_node(const NodeTask& data, ModelConfig hp, const TrainSchedule& schedule);

// ---- link prediction --------------------------------------------------------

struct LinkTask {
  Matrix input;  // built on the training graph
  Matrix query;  // smoothed over the training graph only
  EdgeSplit split;
};

LinkTask prepare_link_task(const Graph& g, const EncodingConfig& enc, std::uint64_t split_seed);

Trained train_link(const LinkTask& data, ModelConfig hp, const TrainSchedule& schedule);

// ---- graph classification -------------------------------------------------

struct GraphTask {
  std::vector<Matrix> inputs;
  std::vector<int> labels;
  FoldPlan folds;
  std::size_t num_classes = 0;
};

GraphTask prepare_graph_task(const TuDataset& ds, const EncodingConfig& enc);

Trained train_graph_fold(const GraphTask& data, std::size_t fold, ModelConfig hp, const TrainSchedule& schedule);

struct CrossValResult {
  std::vector<RunResult> folds;
  MeanStd accuracy;
  std::shared_ptr<GraphPerceiver> last_model;

  nlohmann::json to_json(bool include_timing = false) const;
};

CrossValResult train_graph(const GraphTask& data, ModelConfig hp, const TrainSchedule& schedule);

}  // namespace gpio
