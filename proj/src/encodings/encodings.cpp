#include "gpio/encodings.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "gpio/errors.hpp"

namespace gpio {

Task parse_task(const std::string& s) {
  if (s == "node") return Task::Node;
  if (s == "link") return Task::Link;
  if (s == "graph") return Task::Graph;
  throw ConfigError("unknown task '" + s + "' (expected node|link|graph)");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::Node: return "node";
    case Task::Link: return "link";
    case Task::Graph: return "graph";
  }
  return "?";
}

namespace {

// Sparse vector over [0, n): dense values plus the list of touched indices.
struct SparseVec {
  std::vector<double> value;
  std::vector<std::uint32_t> index;
  std::vector<std::uint8_t> touched;

  explicit SparseVec(std::size_t n) : value(n, 0.0), touched(n, 0) {}

  void add(std::uint32_t i, double v) {
    if (!touched[i]) {
      touched[i] = 1;
      index.push_back(i);
    }
    value[i] += v;
  }
  void clear() {
    for (auto i : index) {
      value[i] = 0.0;
      touched[i] = 0;
    }
    index.clear();
  }
};

}  // namespace

Matrix compute_rwpe(const Graph& g, std::size_t t) {
  if (t == 0) throw ConfigError("RWPE walk length t must be at least 1 (use pe=none to disable)");
  const auto n = g.num_nodes();
  auto s = g.adjacency();
  const auto deg = g.degrees();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k)
      s.values[k] = 1.0 / std::sqrt(static_cast<double>(deg[r]) * static_cast<double>(deg[s.col_idx[k]]));

  Matrix out(n, t);
  const std::size_t steps = (t + 1) / 2;
  SparseVec cur(n), next(n);
  for (std::size_t src = 0; src < n; ++src) {
    if (deg[src] == 0) continue;
    cur.clear();
    cur.add(static_cast<std::uint32_t>(src), 1.0);
    for (std::size_t j = 1; j <= steps; ++j) {
      next.clear();
      for (auto i : cur.index) {
        const double xi = cur.value[i];
        for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) next.add(s.col_idx[k], s.values[k] * xi);
      }
      // Power 2j-1 -> column 2j-2; power 2j -> column 2j-1.
      double odd = 0.0;
      for (auto i : cur.index) odd += cur.value[i] * next.value[i];
      out(src, 2 * j - 2) = odd;
      if (2 * j - 1 < t) {
        double even = 0.0;
        for (auto i : next.index) even += next.value[i] * next.value[i];
        out(src, 2 * j - 1) = even;
      }
      std::swap(cur, next);
    }
  }
  return out;
}

namespace {
void check_rows(const Matrix& x, const Graph& g) {
  if (x.rows != g.num_nodes()) {
    throw ShapeError("feature matrix has " + std::to_string(x.rows) + " rows for a graph with " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
}
}  // namespace

Matrix sgc_smooth(const Matrix& x, const Graph& g, std::size_t L) {
  check_rows(x, g);
  if (L == 0) return x;
  const auto p = normalized_adjacency(g);
  Matrix cur = x;
  for (std::size_t l = 0; l < L; ++l) cur = p.multiply(cur);
  return cur;
}

Matrix appnp_smooth(const Matrix& x, const Graph& g, std::size_t L, double alpha) {
  check_rows(x, g);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("APPNP alpha must lie in [0, 1]");
  if (L == 0) return x;
  const auto p = normalized_adjacency(g);
  const double keep = 1.0 - alpha;
  Matrix cur = x;
  for (std::size_t l = 0; l < L; ++l) {
    Matrix next = p.multiply(cur);
    for (std::size_t i = 0; i < next.data.size(); ++i) next.data[i] = keep * next.data[i] + alpha * x.data[i];
    cur = std::move(next);
  }
  return cur;
}

Matrix fourier_pe(const Graph& g, std::size_t t) {
  if (t == 0 || t % 2 != 0) throw ConfigError("Fourier PE dimension must be a positive even number, got " + std::to_string(t));
  const auto n = g.num_nodes();
  const std::size_t h = t / 2;
  const double top = std::max(1.0, static_cast<double>(n) / 2.0);
  std::vector<double> freq(h);
  for (std::size_t j = 0; j < h; ++j)
    freq[j] = h == 1 ? 1.0 : std::pow(top, static_cast<double>(j) / static_cast<double>(h - 1));
  Matrix out(n, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) / static_cast<double>(n);
    for (std::size_t j = 0; j < h; ++j) {
      const double phase = std::numbers::pi * freq[j] * pos;
      out(i, 2 * j) = std::sin(phase);
      out(i, 2 * j + 1) = std::cos(phase);
    }
  }
  return out;
}

PeKind parse_pe_kind(const std::string& s) {
  if (s == "none") return PeKind::None;
  if (s == "fourier") return PeKind::Fourier;
  if (s == "rwpe") return PeKind::Rwpe;
  throw ConfigError("unknown positional encoding '" + s + "' (expected none|fourier|rwpe)");
}

std::string to_string(PeKind kind) {
  switch (kind) {
    case PeKind::None: return "none";
    case PeKind::Fourier: return "fourier";
    case PeKind::Rwpe: return "rwpe";
  }
  return "?";
}

Matrix build_input_array(const Graph& g, PeKind pe, std::size_t t) {
  const auto& x = g.features();
  if (pe == PeKind::None) {
    if (!x) throw DatasetError("graph has no node features and positional encoding is none; input array would be empty");
    return *x;
  }
  Matrix enc = pe == PeKind::Rwpe ? compute_rwpe(g, t) : fourier_pe(g, t);
  if (!x) return enc;
  return concat_columns(*x, enc);
}

SmoothingMethod parse_smoothing_method(const std::string& s) {
  if (s == "none") return SmoothingMethod::None;
  if (s == "sgc") return SmoothingMethod::Sgc;
  if (s == "appnp") return SmoothingMethod::Appnp;
  throw ConfigError("unknown smoothing method '" + s + "' (expected none|sgc|appnp)");
}

std::string to_string(SmoothingMethod method) {
  switch (method) {
    case SmoothingMethod::None: return "none";
    case SmoothingMethod::Sgc: return "sgc";
    case SmoothingMethod::Appnp: return "appnp";
  }
  return "?";
}

void SmoothingConfig::validate() const {
  if (method == SmoothingMethod::Appnp) {
    if (!alpha) throw ConfigError("appnp smoothing requires alpha");
    if (!(*alpha >= 0.0 && *alpha <= 1.0)) throw ConfigError("appnp alpha must lie in [0, 1]");
  } else if (alpha) {
    throw ConfigError("alpha is only meaningful for appnp smoothing");
  }
}

Matrix smooth(const Matrix& x, const Graph& g, const SmoothingConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case SmoothingMethod::None: check_rows(x, g); return x;
    case SmoothingMethod::Sgc: return sgc_smooth(x, g, cfg.L);
    case SmoothingMethod::Appnp: return appnp_smooth(x, g, cfg.L, *cfg.alpha);
  }
  return x;
}

OutputQuery build_output_query(Task task, const Graph& g, const SmoothingConfig& smoothing, std::size_t d_q) {
  OutputQuery q;
  q.task = task;
  if (task == Task::Graph) {
    if (d_q == 0) throw ConfigError("graph output query dimension must be positive");
    q.values = Matrix(1, d_q);
    q.learnable = true;
    return q;
  }
  if (!g.features()) throw DatasetError("node and link tasks need node features to build the output query");
  if (d_q != g.features()->cols) {
    throw ConfigError("output query dimension " + std::to_string(d_q) + " must equal the feature dimension " +
                      std::to_string(g.features()->cols));
  }
  q.values = smooth(*g.features(), g, smoothing);
  return q;
}

}  // namespace gpio
