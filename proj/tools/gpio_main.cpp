// gpio: train, encode and export for Graph Perceiver IO.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 bad config or usage, 3 dataset
// problem, 4 training diverged.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpio/errors.hpp"
#include "gpio/experiment.hpp"

namespace {

using namespace gpio;
using nlohmann::json;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--seed", c.seed, "Run a single seed instead of the config's list");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--override", c.overrides, "key=value applied to the config (repeatable)");
}

json load_config(const Common& c) {
  json raw = c.config.empty() ? json::object() : read_config_file(c.config);
  if (c.seed) raw["seeds"] = json::array({*c.seed});
  if (!c.out.empty()) raw["output_dir"] = c.out;
  return raw;
}

std::vector<Override> parse_overrides(const Common& c) {
  std::vector<Override> out;
  for (const auto& s : c.overrides) out.push_back(parse_override(s));
  return out;
}

DatasetRef dataset_from(const std::string& path, const std::string& name, const std::string& format) {
  if (path.empty() && name.empty()) throw ConfigError("--dataset PATH or --name NAME is required");
  return resolve_dataset(name.empty() ? std::filesystem::path(path).lexically_normal().filename().string() : name, path,
                         format);
}

int report(int code, const std::string& kind, const std::string& msg) {
  std::cerr << "gpio: " << kind << ": " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph Perceiver IO experiments"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train = app.add_subcommand("train", "Train every grid point and seed of a config");
  add_common(train, train_opts);

  Common enc_opts;
  std::string enc_dataset, enc_name, enc_format, enc_pe = "rwpe", enc_smoothing = "none";
  std::size_t enc_t = 4, enc_L = 0;
  std::optional<double> enc_alpha;
  auto* encode = app.add_subcommand("encode", "Write positional encodings and smoothed features as CSV");
  add_common(encode, enc_opts);
  encode->add_option("--dataset", enc_dataset, "Dataset directory");
  encode->add_option("--name", enc_name, "Dataset name under GPIO_DATA_DIR");
  encode->add_option("--format", enc_format, "portable | tu (detected when omitted)");
  encode->add_option("--pe", enc_pe, "none | rwpe | fourier");
  encode->add_option("--t", enc_t, "Positional encoding width");
  encode->add_option("--smoothing", enc_smoothing, "none | sgc | appnp");
  encode->add_option("--L", enc_L, "Propagation steps");
  encode->add_option("--alpha", enc_alpha, "APPNP teleport probability");

  Common att_opts;
  std::string att_ckpt, att_dataset, att_name, att_format;
  std::size_t att_graph = 0;
  auto* attention = app.add_subcommand("export-attention", "Write head-averaged encoder attention (N x M)");
  add_common(attention, att_opts);
  attention->add_option("--checkpoint", att_ckpt, "model.ckpt from a run")->required();
  attention->add_option("--dataset", att_dataset, "Dataset directory");
  attention->add_option("--name", att_name, "Dataset name under GPIO_DATA_DIR");
  attention->add_option("--format", att_format, "portable | tu");
  attention->add_option("--graph", att_graph, "Graph index for TU datasets");

  Common emb_opts;
  std::string emb_ckpt, emb_dataset, emb_name, emb_format;
  auto* embeddings = app.add_subcommand("export-embeddings", "Write decoded features as TSV with labels");
  add_common(embeddings, emb_opts);
  embeddings->add_option("--checkpoint", emb_ckpt, "model.ckpt from a run")->required();
  embeddings->add_option("--dataset", emb_dataset, "Dataset directory");
  embeddings->add_option("--name", emb_name, "Dataset name under GPIO_DATA_DIR");
  embeddings->add_option("--format", emb_format, "portable | tu");

  Common chk_opts;
  std::string chk_dataset, chk_name, chk_format;
  bool chk_json = false;
  auto* check = app.add_subcommand("convert-check", "Validate a dataset directory and print its counts");
  add_common(check, chk_opts);
  check->add_option("--dataset", chk_dataset, "Dataset directory");
  check->add_option("--name", chk_name, "Dataset name under GPIO_DATA_DIR");
  check->add_option("--format", chk_format, "portable | tu");
  check->add_flag("--json", chk_json, "Print the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) {
      auto configs = expand_config(load_config(train_opts), parse_overrides(train_opts));
      auto summary = run_all(configs);
      for (const auto& point : summary.at("grid_points")) {
        for (const auto& run : point.at("runs")) std::cout << run.at("dir").get<std::string>() << "\t" << run.at("test").dump() << "\n";
      }
      std::cout << (configs.front().output_dir / "summary.json").string() << "\n";
    } else if (*encode) {
      EncodeRequest req;
      req.dataset = dataset_from(enc_dataset, enc_name, enc_format);
      req.pe = parse_pe_kind(enc_pe);
      req.t = enc_t;
      req.smoothing.method = parse_smoothing_method(enc_smoothing);
      req.smoothing.L = enc_L;
      req.smoothing.alpha = enc_alpha;
      req.out_dir = enc_opts.out.empty() ? std::filesystem::path("encoded") : std::filesystem::path(enc_opts.out);
      for (const auto& p : encode_dataset(req)) std::cout << p.string() << "\n";
    } else if (*attention) {
      auto ref = dataset_from(att_dataset, att_name, att_format);
      auto out = att_opts.out.empty() ? std::filesystem::path(att_ckpt).parent_path() : std::filesystem::path(att_opts.out);
      for (const auto& p : export_attention(att_ckpt, ref, out, att_graph)) std::cout << p.string() << "\n";
    } else if (*embeddings) {
      auto ref = dataset_from(emb_dataset, emb_name, emb_format);
      auto out = emb_opts.out.empty() ? std::filesystem::path(emb_ckpt).parent_path() : std::filesystem::path(emb_opts.out);
      std::cout << export_embeddings(emb_ckpt, ref, out).string() << "\n";
    } else if (*check) {
      auto rep = check_dataset(dataset_from(chk_dataset, chk_name, chk_format));
      std::cout << (chk_json ? rep.json.dump(2) + "\n" : rep.text);
    }
  } catch (const ConfigError& e) {
    return report(kExitConfig, "config error", e.what());
  } catch (const DatasetError& e) {
    return report(kExitDataset, "dataset error", e.what());
  } catch (const ShapeError& e) {
    return report(kExitDataset, "shape error", e.what());
  } catch (const DivergenceError& e) {
    return report(kExitDivergence, "diverged", e.what());
  } catch (const std::exception& e) {
    return report(kExitFailure, "error", e.what());
  }
  return kExitOk;
}
