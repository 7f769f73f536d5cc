#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gpio/errors.hpp"
#include "gpio/experiment.hpp"

namespace gpio {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string join(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

json base_defaults(Task task) {
  json d = {
      {"task", to_string(task)},
      {"dataset", {{"name", ""}, {"path", ""}, {"format", ""}}},
      {"encoding", {{"pe", "rwpe"}, {"t", 4}, {"smoothing", {{"method", "appnp"}, {"L", 10}, {"alpha", 0.1}}}}},
      {"model",
       {{"latent_length", 16},
        {"latent_dim", 32},
        {"mhca_heads", 2},
        {"mhca_head_dim", 64},
        {"mhsa_heads", 2},
        {"mhsa_head_dim", 64},
        {"depth", 1},
        {"decoder_out_dim", 0},
        {"use_first_layer_norm", true},
        {"dropout", 0.0}}},
      {"schedule",
       {{"max_epochs", 500},
        {"patience", 100},
        {"eval_every", 1},
        {"learning_rate", 1e-3},
        {"weight_decay", 1e-2},
        {"batch_size", 32}}},
      {"split", {{"mode", "fixed"}, {"folds", 10}}},
      {"seeds", json::array({2025})},
      {"output_dir", "runs"},
      {"export", {{"attention", false}, {"embeddings", false}}},
  };
  if (task == Task::Link) {
    d["encoding"]["smoothing"] = {{"method", "sgc"}, {"L", 1}, {"alpha", 0.1}};
    d["model"]["mhca_heads"] = 1;
    d["model"]["mhca_head_dim"] = 128;
    d["model"]["mhsa_heads"] = 1;
    d["model"]["mhsa_head_dim"] = 128;
    d["schedule"]["weight_decay"] = 5e-4;
  } else if (task == Task::Graph) {
    d["encoding"] = {{"pe", "rwpe"}, {"t", 64}, {"smoothing", {{"method", "none"}, {"L", 0}, {"alpha", 0.1}}}};
    d["model"]["latent_length"] = 8;
    d["model"]["mhca_heads"] = 1;
    d["model"]["mhca_head_dim"] = 4;
    d["model"]["mhsa_heads"] = 1;
    d["model"]["mhsa_head_dim"] = 4;
    d["schedule"]["max_epochs"] = 200;
    d["schedule"]["patience"] = 200;
    d["schedule"]["weight_decay"] = 5e-4;
  }
  return d;
}

struct Preset {
  double lr, wd;
  int n, d, ca_heads, ca_dim, sa_heads, sa_dim;
  const char* pe;
  int t;
  const char* smoothing;
  int L;
};

// Head counts are capped at heads * head_dim <= 128 for node and link tasks;
// every other value is one of the paper's candidates for that dataset.
const Preset* find_preset(Task task, const std::string& name) {
  static const std::pair<std::string, Preset> node[] = {
      {"cora", {5e-4, 1e-2, 16, 32, 2, 64, 2, 64, "none", 4, "appnp", 10}},
      {"citeseer", {1e-3, 5e-2, 4, 64, 4, 32, 4, 32, "none", 4, "appnp", 10}},
      {"pubmed", {5e-3, 5e-2, 4, 32, 1, 64, 1, 64, "rwpe", 4, "appnp", 10}},
  };
  static const std::pair<std::string, Preset> link[] = {
      {"cora", {5e-5, 5e-4, 16, 32, 1, 128, 1, 128, "rwpe", 4, "sgc", 1}},
      {"citeseer", {1e-5, 5e-3, 32, 256, 1, 128, 1, 128, "none", 4, "sgc", 2}},
      {"pubmed", {5e-4, 5e-4, 32, 32, 1, 128, 1, 128, "none", 4, "sgc", 1}},
  };
  static const std::pair<std::string, Preset> graph[] = {
      {"mutag", {1e-3, 5e-4, 8, 32, 1, 4, 1, 4, "rwpe", 64, "none", 0}},
      {"proteins", {1e-3, 5e-4, 16, 32, 1, 4, 1, 4, "rwpe", 64, "none", 0}},
      {"imdb-binary", {1e-3, 5e-4, 32, 32, 1, 4, 1, 4, "rwpe", 64, "none", 0}},
      {"reddit-binary", {5e-3, 5e-4, 32, 32, 8, 4, 4, 4, "rwpe", 64, "none", 0}},
      {"collab", {5e-3, 5e-4, 64, 256, 8, 4, 4, 4, "rwpe", 64, "none", 0}},
  };
  std::span<const std::pair<std::string, Preset>> table;
  switch (task) {
    case Task::Node: table = node; break;
    case Task::Link: table = link; break;
    case Task::Graph: table = graph; break;
  }
  for (const auto& [key, p] : table)
    if (key == name) return &p;
  return nullptr;
}

// Integer schema leaves accept only non-negative integers; float leaves accept
// any number.
bool leaf_type_matches(const json& schema, const json& v) {
  if (schema.is_boolean()) return v.is_boolean();
  if (schema.is_string()) return v.is_string();
  if (schema.is_number_float()) return v.is_number();
  if (schema.is_number_integer()) return v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0);
  return false;
}

std::string type_name(const json& schema) {
  if (schema.is_boolean()) return "a boolean";
  if (schema.is_string()) return "a string";
  if (schema.is_number_float()) return "a number";
  return "a non-negative integer";
}

void check_leaf(const json& schema, const json& v, const std::string& key) {
  if (v.is_array()) {
    if (v.empty()) throw ConfigError("config key '" + key + "': grid list is empty");
    for (const auto& x : v)
      if (!leaf_type_matches(schema, x)) throw ConfigError("config key '" + key + "': every grid value must be " + type_name(schema));
    return;
  }
  if (!leaf_type_matches(schema, v)) throw ConfigError("config key '" + key + "' must be " + type_name(schema));
}

void check_against(const json& schema, const json& raw, std::vector<std::string>& path) {
  if (!raw.is_object()) throw ConfigError("config key '" + (path.empty() ? std::string("<root>") : join(path)) + "' must be an object");
  for (const auto& [key, value] : raw.items()) {
    path.push_back(key);
    const auto full = join(path);
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    const auto& s = schema.at(key);
    if (full == "seeds") {
      const auto seed_ok = [](const json& x) { return x.is_number_integer() && (x.is_number_unsigned() || x.get<std::int64_t>() >= 0); };
      const bool ok = seed_ok(value) || (value.is_array() && !value.empty() && std::all_of(value.begin(), value.end(), seed_ok));
      if (!ok) throw ConfigError("config key 'seeds' must be a non-negative integer or a non-empty list of them");
    } else if (s.is_object()) {
      check_against(s, value, path);
    } else {
      check_leaf(s, value, full);
    }
    path.pop_back();
  }
}

void overlay(json& dst, const json& src) {
  for (const auto& [key, value] : src.items()) {
    if (value.is_object() && dst[key].is_object()) {
      overlay(dst[key], value);
    } else {
      dst[key] = value;
    }
  }
}

json* locate(json& root, const std::string& dotted, bool create) {
  json* node = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("malformed override key '" + dotted + "'");
    if (!node->is_object()) throw ConfigError("override key '" + dotted + "' descends into a non-object");
    if (!node->contains(part)) {
      if (!create) return nullptr;
      (*node)[part] = json::object();
    }
    node = &(*node)[part];
  }
  return node;
}

std::string scalar_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string (grids are not allowed here)");
  return v.get<std::string>();
}

void collect_grid(const json& j, std::vector<std::string>& path, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [key, value] : j.items()) {
    path.push_back(key);
    if (value.is_object()) {
      collect_grid(value, path, out);
    } else if (value.is_array() && join(path) != "seeds") {
      out.emplace_back(join(path), value);
    }
    path.pop_back();
  }
}

template <class T>
T get(const json& j, const char* a, const char* b) {
  return j.at(a).at(b).get<T>();
}

ExperimentConfig from_resolved(const json& j) {
  ExperimentConfig c;
  c.task = parse_task(j.at("task").get<std::string>());
  c.dataset_name = get<std::string>(j, "dataset", "name");
  c.dataset_path = get<std::string>(j, "dataset", "path");
  c.dataset_format = get<std::string>(j, "dataset", "format");
  if (!c.dataset_format.empty()) parse_dataset_format(c.dataset_format);

  const auto& e = j.at("encoding");
  c.encoding.pe = parse_pe_kind(e.at("pe").get<std::string>());
  c.encoding.t = e.at("t").get<std::size_t>();
  const auto& sm = e.at("smoothing");
  c.encoding.smoothing.method = parse_smoothing_method(sm.at("method").get<std::string>());
  c.encoding.smoothing.L = sm.at("L").get<std::size_t>();
  if (c.encoding.smoothing.method == SmoothingMethod::Appnp) c.encoding.smoothing.alpha = sm.at("alpha").get<double>();
  c.encoding.smoothing.validate();
  if (c.encoding.pe != PeKind::None && c.encoding.t == 0) throw ConfigError("config key 'encoding.t' must be positive when pe is set");
  if (c.encoding.pe == PeKind::Fourier && c.encoding.t % 2 != 0) throw ConfigError("config key 'encoding.t' must be even for fourier pe");
  if (c.task == Task::Graph && c.encoding.smoothing.method != SmoothingMethod::None)
    throw ConfigError("config key 'encoding.smoothing.method' must be none for the graph task");

  const auto& m = j.at("model");
  c.model.task = c.task;
  c.model.latent_length = m.at("latent_length").get<std::size_t>();
  c.model.latent_dim = m.at("latent_dim").get<std::size_t>();
  c.model.mhca_heads = m.at("mhca_heads").get<std::size_t>();
  c.model.mhca_head_dim = m.at("mhca_head_dim").get<std::size_t>();
  c.model.mhsa_heads = m.at("mhsa_heads").get<std::size_t>();
  c.model.mhsa_head_dim = m.at("mhsa_head_dim").get<std::size_t>();
  c.model.depth = m.at("depth").get<std::size_t>();
  c.model.decoder_out_dim = m.at("decoder_out_dim").get<std::size_t>();
  c.model.use_first_layer_norm = m.at("use_first_layer_norm").get<bool>();
  c.model.dropout = m.at("dropout").get<double>();
  for (const char* k : {"latent_length", "latent_dim", "mhca_heads", "mhca_head_dim", "mhsa_heads", "mhsa_head_dim"})
    if (m.at(k).get<std::size_t>() == 0) throw ConfigError(std::string("config key 'model.") + k + "' must be positive");
  if (!(c.model.dropout >= 0.0 && c.model.dropout < 1.0)) throw ConfigError("config key 'model.dropout' must lie in [0, 1)");

  const auto& s = j.at("schedule");
  c.schedule.max_epochs = s.at("max_epochs").get<std::size_t>();
  c.schedule.patience = s.at("patience").get<std::size_t>();
  c.schedule.eval_every = s.at("eval_every").get<std::size_t>();
  c.schedule.learning_rate = s.at("learning_rate").get<double>();
  c.schedule.weight_decay = s.at("weight_decay").get<double>();
  c.schedule.batch_size = s.at("batch_size").get<std::size_t>();
  c.schedule.validate();

  c.split_mode = parse_split_mode(get<std::string>(j, "split", "mode"));
  c.folds = get<std::size_t>(j, "split", "folds");
  if (c.folds < 2) throw ConfigError("config key 'split.folds' must be at least 2");

  const auto& seeds = j.at("seeds");
  c.seeds.clear();
  if (seeds.is_array()) {
    for (const auto& x : seeds) c.seeds.push_back(x.get<std::uint64_t>());
  } else {
    c.seeds.push_back(seeds.get<std::uint64_t>());
  }
  c.output_dir = j.at("output_dir").get<std::string>();
  c.export_attention = get<bool>(j, "export", "attention");
  c.export_embeddings = get<bool>(j, "export", "embeddings");
  return c;
}

}  // namespace

DatasetFormat parse_dataset_format(const std::string& s) {
  if (s == "portable") return DatasetFormat::Portable;
  if (s == "tu") return DatasetFormat::Tu;
  throw ConfigError("unknown dataset format '" + s + "' (expected portable|tu)");
}

std::string to_string(DatasetFormat f) { return f == DatasetFormat::Portable ? "portable" : "tu"; }

json ExperimentConfig::to_json() const {
  json smoothing = {{"method", to_string(encoding.smoothing.method)}, {"L", encoding.smoothing.L}};
  if (encoding.smoothing.alpha) smoothing["alpha"] = *encoding.smoothing.alpha;
  json m = model.to_json();
  for (const char* k : {"task", "input_dim", "query_dim", "num_classes"}) m.erase(k);
  json sched = schedule.to_json();
  sched.erase("seed");  // seeds are listed at the top level
  return {
      {"task", to_string(task)},
      {"dataset", {{"name", dataset_name}, {"path", dataset_path}, {"format", dataset_format}}},
      {"encoding", {{"pe", to_string(encoding.pe)}, {"t", encoding.t}, {"smoothing", smoothing}}},
      {"model", m},
      {"schedule", sched},
      {"split", {{"mode", to_string(split_mode)}, {"folds", folds}}},
      {"seeds", seeds},
      {"export", {{"attention", export_attention}, {"embeddings", export_embeddings}}},
  };
}

std::string ExperimentConfig::hash(std::uint64_t seed) const {
  auto j = to_json();
  j["seeds"] = json::array({seed});
  // FNV-1a over the canonical dump (keys are sorted by the json type).
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not of the form key=value");
  Override o;
  o.path = text.substr(0, eq);
  const auto raw = text.substr(eq + 1);
  o.value = json::parse(raw, nullptr, false);
  if (o.value.is_discarded()) o.value = raw;
  return o;
}

json default_config(Task task, const std::string& dataset_name) {
  auto d = base_defaults(task);
  if (const auto* p = find_preset(task, lower(dataset_name))) {
    d["schedule"]["learning_rate"] = p->lr;
    d["schedule"]["weight_decay"] = p->wd;
    auto& m = d["model"];
    m["latent_length"] = p->n;
    m["latent_dim"] = p->d;
    m["mhca_heads"] = p->ca_heads;
    m["mhca_head_dim"] = p->ca_dim;
    m["mhsa_heads"] = p->sa_heads;
    m["mhsa_head_dim"] = p->sa_dim;
    d["encoding"]["pe"] = p->pe;
    d["encoding"]["t"] = p->t;
    d["encoding"]["smoothing"]["method"] = p->smoothing;
    d["encoding"]["smoothing"]["L"] = p->L;
  }
  return d;
}

std::vector<ExperimentConfig> expand_config(const json& raw_in, const std::vector<Override>& overrides) {
  if (!raw_in.is_object()) throw ConfigError("config must be a JSON object");
  json raw = raw_in;
  // Overrides are checked against the schema below like any other key.
  for (const auto& o : overrides) *locate(raw, o.path, true) = o.value;

  const auto task = parse_task(scalar_string(raw, "task", "node"));
  std::string name;
  if (raw.contains("dataset")) {
    const auto& ds = raw.at("dataset");
    if (!ds.is_object()) throw ConfigError("config key 'dataset' must be an object");
    name = scalar_string(ds, "name", "");
    if (name.empty()) {
      const auto path = scalar_string(ds, "path", "");
      if (!path.empty()) name = std::filesystem::path(path).lexically_normal().filename().string();
      if (name.empty() && !path.empty()) name = std::filesystem::path(path).lexically_normal().parent_path().filename().string();
    }
  }
  if (name.empty()) throw ConfigError("config key 'dataset.name' or 'dataset.path' is required");

  auto resolved = default_config(task, name);
  std::vector<std::string> path;
  check_against(resolved, raw, path);
  overlay(resolved, raw);
  resolved["dataset"]["name"] = lower(name);

  std::vector<std::pair<std::string, json>> grid;
  path.clear();
  collect_grid(resolved, path, grid);

  std::vector<ExperimentConfig> out;
  std::vector<std::size_t> idx(grid.size(), 0);
  while (true) {
    json point = resolved;
    for (std::size_t g = 0; g < grid.size(); ++g) *locate(point, grid[g].first, false) = grid[g].second[idx[g]];
    try {
      out.push_back(from_resolved(point));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config value error: ") + e.what());
    }
    // Odometer with the last key varying fastest.
    std::size_t g = grid.size();
    while (g > 0) {
      --g;
      if (++idx[g] < grid[g].second.size()) break;
      idx[g] = 0;
      if (g == 0) return out;
    }
    if (grid.empty()) return out;
  }
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return json::parse(in, nullptr, true, false);
  } catch (const json::parse_error& e) {
    // e.byte locates the error; convert to line/column for the message.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

DatasetRef resolve_dataset(const std::string& name, const std::string& path, const std::string& format) {
  DatasetRef ref;
  ref.name = lower(name);
  if (!path.empty()) {
    ref.path = path;
  } else {
    const char* root = std::getenv("GPIO_DATA_DIR");
    if (!root || !*root) throw DatasetError("dataset '" + name + "' has no path and GPIO_DATA_DIR is not set");
    // Accept either the lower-case key or the original spelling on disk.
    ref.path = std::filesystem::path(root) / name;
    if (!std::filesystem::is_directory(ref.path)) {
      for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory() && lower(entry.path().filename().string()) == ref.name) ref.path = entry.path();
      }
    }
  }
  if (!std::filesystem::is_directory(ref.path)) throw DatasetError("dataset directory not found: " + ref.path.string());

  std::string tu_prefix;
  for (const auto& entry : std::filesystem::directory_iterator(ref.path)) {
    const auto f = entry.path().filename().string();
    if (f.size() > 6 && f.ends_with("_A.txt")) tu_prefix = f.substr(0, f.size() - 6);
  }
  if (!format.empty()) {
    ref.format = parse_dataset_format(format);
  } else if (std::filesystem::exists(ref.path / "meta.json")) {
    ref.format = DatasetFormat::Portable;
  } else if (!tu_prefix.empty()) {
    ref.format = DatasetFormat::Tu;
  } else {
    throw DatasetError("cannot tell the format of " + ref.path.string() + " (no meta.json and no *_A.txt)");
  }
  if (ref.format == DatasetFormat::Tu) {
    if (tu_prefix.empty()) throw DatasetError("no <name>_A.txt in TU directory " + ref.path.string());
    ref.tu_prefix = tu_prefix;
  }
  return ref;
}

}  // namespace gpio
