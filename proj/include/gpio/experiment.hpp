#pragma once

// Experiment configuration, dataset resolution, run dispatch and artifact
// export. The gpio command-line tool is a thin shell over this header.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpio/io.hpp"
#include "gpio/model.hpp"
#include "gpio/splits.hpp"
#include "gpio/train.hpp"

namespace gpio {

enum class DatasetFormat { Portable, Tu };

DatasetFormat parse_dataset_format(const std::string& s);
std::string to_string(DatasetFormat f);

struct DatasetRef {
  std::string name;             // lower-case key for per-dataset defaults
  std::filesystem::path path;   // resolved directory
  DatasetFormat format = DatasetFormat::Portable;
  std::string tu_prefix;        // file prefix inside a TU directory
};

/// One fully resolved run configuration (a single grid point).
struct ExperimentConfig {
  Task task = Task::Node;
  // Unresolved: the directory is looked up when the run starts.
  std::string dataset_name;
  std::string dataset_path;
  std::string dataset_format;  // "", "portable" or "tu"
  EncodingConfig encoding;
  ModelConfig model;  // architecture fields; dims are filled from data at run time
  TrainSchedule schedule;
  SplitMode split_mode = SplitMode::Fixed;  // node task
  std::size_t folds = 10;                   // graph task
  std::vector<std::uint64_t> seeds{2025};
  std::filesystem::path output_dir = "runs";
  bool export_attention = false;
  bool export_embeddings = false;

  /// Echo written into artifacts. Leaves out output_dir so the same experiment
  /// written to two places serializes identically.
  nlohmann::json to_json() const;
  /// Hex digest of to_json() with the given seed, used in run directory names.
  std::string hash(std::uint64_t seed) const;
};

/// Key/value pair from --override, e.g. "model.latent_dim=32". The value is
/// parsed as JSON when possible, otherwise taken as a string.
struct Override {
  std::string path;
  nlohmann::json value;
};

Override parse_override(const std::string& text);

/// Schema-checked defaults for every key. Dataset-specific values are layered
/// on top when the dataset name is known.
nlohmann::json default_config(Task task, const std::string& dataset_name);

/// Strict expansion: unknown keys and wrong types throw ConfigError naming the
/// key. List values (outside "seeds") expand into a grid, one config per
/// combination, ordered by key path then list position.
std::vector<ExperimentConfig> expand_config(const nlohmann::json& raw, const std::vector<Override>& overrides = {});

/// Parses a config file; syntax errors carry line and column.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Resolves name/path/format. Falls back to $GPIO_DATA_DIR/<name> when no path
/// is given. Throws DatasetError when nothing usable is found.
DatasetRef resolve_dataset(const std::string& name, const std::string& path, const std::string& format);

// ---- running ----------------------------------------------------------------

struct RunRecord {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  nlohmann::json metrics;
};

/// Trains one config over all of its seeds. Each seed writes config.json,
/// metrics.json, timing.json, curves CSV, a checkpoint and optional exports
/// into <output_dir>/<dataset>-<task>-<seed>-<hash>.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

/// Mean/std of the test metrics across seeds, per config.
nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs);

/// Full pipeline behind `gpio train`: expand, run every grid point, write
/// <output_dir>/summary.json. Returns the summary.
nlohmann::json run_all(const std::vector<ExperimentConfig>& configs);

// ---- standalone exports -------------------------------------------------------

struct EncodeRequest {
  DatasetRef dataset;
  PeKind pe = PeKind::Rwpe;
  std::size_t t = 4;
  SmoothingConfig smoothing;
  std::filesystem::path out_dir;
};

/// Writes rwpe.csv (or fourier.csv) when pe != none and smoothed.csv when a
/// smoothing method is set. Returns the files written.
std::vector<std::filesystem::path> encode_dataset(const EncodeRequest& req);

/// Head-averaged encoder attention (N x M) plus a node-class column file.
/// graph_index selects the graph for TU datasets.
std::vector<std::filesystem::path> export_attention(const std::filesystem::path& checkpoint, const DatasetRef& dataset,
                                                    const std::filesystem::path& out_dir, std::size_t graph_index = 0);

/// Decoded features as TSV with a trailing label column: one row per node for
/// node/link checkpoints, one per graph for graph checkpoints.
std::filesystem::path export_embeddings(const std::filesystem::path& checkpoint, const DatasetRef& dataset,
                                        const std::filesystem::path& out_dir);

struct DatasetReport {
  std::string text;  // human-readable, one fact per line
  nlohmann::json json;
};

/// Loads and validates a dataset directory, reporting its counts.
DatasetReport check_dataset(const DatasetRef& dataset);

/// Stable process exit codes.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitDataset = 3, kExitDivergence = 4 };

}  // namespace gpio
