#include "gpio/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "gpio/errors.hpp"

namespace gpio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Trailing blank lines are tolerated; interior ones are not.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line + 1);
}

template <typename T>
T parse_number(std::string_view s, const fs::path& file, std::size_t line) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw DatasetError(where(file, line) + ": cannot parse '" + std::string(s) + "'");
  }
  return value;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + p.string());
  out << text;
}

std::size_t meta_count(const json& meta, const char* key) {
  if (!meta.contains(key)) throw DatasetError(std::string("meta.json missing '") + key + "'");
  const auto& v = meta.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw DatasetError(std::string("meta.json '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> index_list(const json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw DatasetError(std::string("splits.json fixed split missing array '") + key + "'");
  }
  std::vector<std::size_t> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<std::size_t>() >= n) {
      throw DatasetError(std::string("splits.json '") + key + "' holds an index outside [0, num_nodes)");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_delimited(const fs::path& path, const Matrix& m, char sep) {
  std::string text;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) text += sep;
      text += format_double(m(i, j));
    }
    text += '\n';
  }
  write_file(path, text);
}

PortableDataset load_portable(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  PortableDataset ds;

  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::parse_error& e) {
    throw DatasetError("meta.json: " + std::string(e.what()));
  }
  if (!meta.is_object()) throw DatasetError("meta.json must hold an object");
  if (!meta.contains("name") || !meta["name"].is_string()) throw DatasetError("meta.json missing string 'name'");
  ds.meta.name = meta["name"].get<std::string>();
  ds.meta.num_nodes = meta_count(meta, "num_nodes");
  ds.meta.num_features = meta_count(meta, "num_features");
  ds.meta.num_classes = meta_count(meta, "num_classes");
  if (meta.contains("task")) {
    if (!meta["task"].is_string()) throw DatasetError("meta.json 'task' must be a string");
    ds.meta.task = meta["task"].get<std::string>();
  }
  if (ds.meta.task != "node" && ds.meta.task != "link") {
    throw DatasetError("meta.json 'task' must be node or link, got '" + ds.meta.task + "'");
  }
  const auto n = ds.meta.num_nodes;
  if (n == 0) throw DatasetError("meta.json num_nodes must be positive");

  const auto edges_path = dir / "edges.tsv";
  const auto edge_text = read_file(edges_path);
  std::vector<Edge> edges;
  const auto edge_lines = split_lines(edge_text);
  edges.reserve(edge_lines.size());
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    auto cols = split_on(edge_lines[i], '\t');
    if (cols.size() != 2) throw DatasetError(where(edges_path, i) + ": expected 'u<TAB>v'");
    auto u = parse_number<std::uint64_t>(cols[0], edges_path, i);
    auto v = parse_number<std::uint64_t>(cols[1], edges_path, i);
    if (u >= n || v >= n) {
      throw DatasetError(where(edges_path, i) + ": node id out of range for num_nodes=" + std::to_string(n));
    }
    if (u >= v) throw DatasetError(where(edges_path, i) + ": edges must be written with u < v");
    edges.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v)});
  }
  ds.graph = Graph(n, std::move(edges));

  if (ds.meta.num_features > 0) {
    const auto path = dir / "features.csv";
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    if (lines.size() != n) {
      throw DatasetError("features.csv has " + std::to_string(lines.size()) + " rows, meta.json says " +
                         std::to_string(n));
    }
    Matrix x(n, ds.meta.num_features);
    for (std::size_t i = 0; i < n; ++i) {
      auto cols = split_on(lines[i], ',');
      if (cols.size() != ds.meta.num_features) {
        throw DatasetError(where(path, i) + ": expected " + std::to_string(ds.meta.num_features) + " values, got " +
                           std::to_string(cols.size()));
      }
      for (std::size_t j = 0; j < cols.size(); ++j) x(i, j) = parse_number<double>(cols[j], path, i);
    }
    ds.graph.set_features(std::move(x));
  }

  if (ds.meta.num_classes > 0) {
    const auto path = dir / "labels.csv";
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    if (lines.size() != n) {
      throw DatasetError("labels.csv has " + std::to_string(lines.size()) + " rows, meta.json says " +
                         std::to_string(n));
    }
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = parse_number<int>(lines[i], path, i);
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= ds.meta.num_classes) {
        throw DatasetError(where(path, i) + ": class id outside [0, num_classes)");
      }
    }
    ds.graph.set_node_labels(std::move(labels));
  }

  const auto splits_path = dir / "splits.json";
  if (fs::exists(splits_path)) {
    json j;
    try {
      j = json::parse(read_file(splits_path));
    } catch (const json::parse_error& e) {
      throw DatasetError("splits.json: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("fixed") || !j["fixed"].is_object()) {
      throw DatasetError("splits.json must hold an object with a 'fixed' entry");
    }
    NodeSplit split;
    split.mode = SplitMode::Fixed;
    split.train = index_list(j["fixed"], "train", n);
    split.val = index_list(j["fixed"], "val", n);
    split.test = index_list(j["fixed"], "test", n);
    validate_node_split(split, n);
    ds.fixed_split = std::move(split);
  }
  return ds;
}

void save_portable(const fs::path& dir, const PortableDataset& ds) {
  fs::create_directories(dir);
  const auto& g = ds.graph;
  json meta = {{"name", ds.meta.name},
               {"num_nodes", g.num_nodes()},
               {"num_features", g.features() ? g.features()->cols : 0},
               {"num_classes", ds.meta.num_classes},
               {"task", ds.meta.task}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::string edges;
  for (const auto& e : g.edges()) edges += std::to_string(e.u) + "\t" + std::to_string(e.v) + "\n";
  write_file(dir / "edges.tsv", edges);

  if (g.features() && g.features()->cols > 0) {
    std::string text;
    const auto& x = *g.features();
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t j = 0; j < x.cols; ++j) {
        if (j) text += ',';
        text += format_double(x(i, j));
      }
      text += '\n';
    }
    write_file(dir / "features.csv", text);
  }
  if (g.node_labels() && ds.meta.num_classes > 0) {
    std::string text;
    for (int l : *g.node_labels()) text += std::to_string(l) + "\n";
    write_file(dir / "labels.csv", text);
  }
  if (ds.fixed_split) {
    json s = {{"fixed",
               {{"train", ds.fixed_split->train}, {"val", ds.fixed_split->val}, {"test", ds.fixed_split->test}}}};
    write_file(dir / "splits.json", s.dump() + "\n");
  }
}

TuDataset load_tu(const fs::path& dir, const std::string& name, std::uint64_t seed, std::size_t k) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  const auto file = [&](const char* suffix) { return dir / (name + "_" + suffix + ".txt"); };

  // Graph indicator: one 1-indexed graph id per node, nondecreasing, no gaps.
  const auto ind_path = file("graph_indicator");
  const auto ind_text = read_file(ind_path);
  const auto ind_lines = split_lines(ind_text);
  const std::size_t total_nodes = ind_lines.size();
  if (total_nodes == 0) throw DatasetError(ind_path.filename().string() + " is empty");
  std::vector<std::size_t> graph_of(total_nodes);
  std::vector<std::size_t> first_node{0};
  for (std::size_t i = 0; i < total_nodes; ++i) {
    auto id = parse_number<long long>(ind_lines[i], ind_path, i);
    if (id < 1) throw DatasetError(where(ind_path, i) + ": graph ids are 1-indexed");
    graph_of[i] = static_cast<std::size_t>(id - 1);
    if (i == 0) {
      if (graph_of[0] != 0) throw DatasetError(where(ind_path, 0) + ": graph indicator must start at graph 1");
      continue;
    }
    if (graph_of[i] == graph_of[i - 1]) continue;
    if (graph_of[i] != graph_of[i - 1] + 1) {
      throw DatasetError(where(ind_path, i) + ": graph indicator jumps from " + std::to_string(graph_of[i - 1] + 1) +
                         " to " + std::to_string(graph_of[i] + 1));
    }
    first_node.push_back(i);
  }
  const std::size_t num_graphs = first_node.size();
  first_node.push_back(total_nodes);

  const auto gl_path = file("graph_labels");
  const auto gl_text = read_file(gl_path);
  const auto gl_lines = split_lines(gl_text);
  if (gl_lines.size() != num_graphs) {
    throw DatasetError(gl_path.filename().string() + " has " + std::to_string(gl_lines.size()) +
                       " labels for " + std::to_string(num_graphs) + " graphs");
  }
  std::vector<long> raw_graph_labels(num_graphs);
  for (std::size_t i = 0; i < num_graphs; ++i) raw_graph_labels[i] = parse_number<long>(gl_lines[i], gl_path, i);

  std::vector<long> raw_node_labels;
  const auto nl_path = file("node_labels");
  const bool has_node_labels = fs::exists(nl_path);
  if (has_node_labels) {
    const auto nl_text = read_file(nl_path);
    const auto nl_lines = split_lines(nl_text);
    if (nl_lines.size() != total_nodes) {
      throw DatasetError(nl_path.filename().string() + " has " + std::to_string(nl_lines.size()) + " rows for " +
                         std::to_string(total_nodes) + " nodes");
    }
    raw_node_labels.resize(total_nodes);
    for (std::size_t i = 0; i < total_nodes; ++i) {
      // Some TU releases carry several comma-separated columns; the first is the label.
      auto first = split_on(nl_lines[i], ',').front();
      raw_node_labels[i] = parse_number<long>(first, nl_path, i);
    }
  }

  const auto a_path = file("A");
  const auto a_text = read_file(a_path);
  const auto a_lines = split_lines(a_text);
  std::vector<std::vector<Edge>> per_graph(num_graphs);
  std::vector<std::unordered_set<std::uint64_t>> seen(num_graphs);
  for (std::size_t i = 0; i < a_lines.size(); ++i) {
    auto cols = split_on(a_lines[i], ',');
    if (cols.size() != 2) throw DatasetError(where(a_path, i) + ": expected 'a, b'");
    auto a = parse_number<long long>(cols[0], a_path, i);
    auto b = parse_number<long long>(cols[1], a_path, i);
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > total_nodes || static_cast<std::size_t>(b) > total_nodes) {
      throw DatasetError(where(a_path, i) + ": dangling node id (valid range 1.." + std::to_string(total_nodes) + ")");
    }
    const auto ga = graph_of[a - 1], gb = graph_of[b - 1];
    if (ga != gb) throw DatasetError(where(a_path, i) + ": edge joins nodes of different graphs");
    if (a == b) continue;
    auto u = static_cast<std::uint32_t>(a - 1 - first_node[ga]);
    auto v = static_cast<std::uint32_t>(b - 1 - first_node[ga]);
    if (seen[ga].insert(edge_key(u, v)).second) per_graph[ga].push_back({std::min(u, v), std::max(u, v)});
  }

  TuDataset ds;
  ds.name = name;
  {
    std::vector<long> values(raw_graph_labels);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    ds.graph_label_values = values;
    ds.num_classes = values.size();
  }
  if (has_node_labels) {
    std::vector<long> values(raw_node_labels);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    ds.node_label_values = values;
  }
  const auto column_of = [](const std::vector<long>& values, long v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  ds.graphs.reserve(num_graphs);
  std::vector<int> labels(num_graphs);
  for (std::size_t gi = 0; gi < num_graphs; ++gi) {
    const auto n = first_node[gi + 1] - first_node[gi];
    Graph g(n, std::move(per_graph[gi]));
    if (has_node_labels) {
      Matrix x(n, ds.node_label_values.size());
      for (std::size_t i = 0; i < n; ++i) x(i, column_of(ds.node_label_values, raw_node_labels[first_node[gi] + i])) = 1.0;
      g.set_features(std::move(x));
    }
    labels[gi] = static_cast<int>(column_of(ds.graph_label_values, raw_graph_labels[gi]));
    g.set_graph_label(labels[gi]);
    ds.graphs.push_back(std::move(g));
  }
  // Too few graphs for k folds leaves the plan empty; graph training rejects it.
  ds.folds.k = k;
  if (num_graphs >= k) ds.folds = make_fold_plan(labels, k, seed);
  return ds;
}

void save_tu(const fs::path& dir, const std::string& name, const std::vector<Graph>& graphs) {
  fs::create_directories(dir);
  std::string a, indicator, glabels, nlabels;
  bool one_hot = !graphs.empty();
  for (const auto& g : graphs) {
    if (!g.features()) {
      one_hot = false;
      break;
    }
    const auto& x = *g.features();
    for (std::size_t i = 0; i < x.rows && one_hot; ++i) {
      std::size_t ones = 0;
      for (std::size_t j = 0; j < x.cols; ++j) {
        if (x(i, j) == 1.0) {
          ++ones;
        } else if (x(i, j) != 0.0) {
          one_hot = false;
        }
      }
      if (ones != 1) one_hot = false;
    }
  }
  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    if (!g.graph_label()) throw DatasetError("save_tu: graph " + std::to_string(gi) + " has no label");
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      indicator += std::to_string(gi + 1) + "\n";
      if (one_hot) {
        const auto row = g.features()->row(i);
        nlabels += std::to_string(std::find(row.begin(), row.end(), 1.0) - row.begin()) + "\n";
      }
    }
    // Both directions, as in the published files.
    for (const auto& e : g.edges()) {
      a += std::to_string(offset + e.u + 1) + ", " + std::to_string(offset + e.v + 1) + "\n";
      a += std::to_string(offset + e.v + 1) + ", " + std::to_string(offset + e.u + 1) + "\n";
    }
    glabels += std::to_string(*g.graph_label()) + "\n";
    offset += g.num_nodes();
  }
  write_file(dir / (name + "_A.txt"), a);
  write_file(dir / (name + "_graph_indicator.txt"), indicator);
  write_file(dir / (name + "_graph_labels.txt"), glabels);
  if (one_hot) write_file(dir / (name + "_node_labels.txt"), nlabels);
}

}  // namespace gpio
