#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "gpio/graph.hpp"
#include "gpio/matrix.hpp"
#include "gpio/task.hpp"

namespace gpio {

/// Return probabilities of random walks: column k of the M x t result holds
/// diag(R^{k+1}) with R = A D^{-1}. Isolated nodes get a zero row.
///
/// Uses R^k_ii = S^k_ii for S = D^{-1/2} A D^{-1/2}, so each source node only
/// needs ceil(t/2) sparse propagation steps:
///   S^{2j}_ii = |S^j e_i|^2,   S^{2j+1}_ii = <S^j e_i, S^{j+1} e_i>.
Matrix compute_rwpe(const Graph& g, std::size_t t);

/// P^L X with P = D~^{-1/2} (A + I) D~^{-1/2}.
Matrix sgc_smooth(const Matrix& x, const Graph& g, std::size_t L);

/// X_l = (1 - alpha) P X_{l-1} + alpha X_0, returning X_L.
Matrix appnp_smooth(const Matrix& x, const Graph& g, std::size_t L, double alpha);

/// Sinusoids of the canonical node index: for h = t/2 frequencies
/// f_j = F^{j/(h-1)} with F = max(1, M/2), columns (2j, 2j+1) of row i hold
/// sin(pi f_j i/M) and cos(pi f_j i/M). Depends on node order by design.
Matrix fourier_pe(const Graph& g, std::size_t t);

enum class PeKind { None, Fourier, Rwpe };

PeKind parse_pe_kind(const std::string& s);
std::string to_string(PeKind kind);

/// [X | PE]. Featureless graphs yield PE alone; pe == None then is an error.
Matrix build_input_array(const Graph& g, PeKind pe, std::size_t t);

enum class SmoothingMethod { None, Sgc, Appnp };

SmoothingMethod parse_smoothing_method(const std::string& s);
std::string to_string(SmoothingMethod method);

struct SmoothingConfig {
  SmoothingMethod method = SmoothingMethod::None;
  std::size_t L = 0;
  std::optional<double> alpha;  // set iff method == Appnp

  void validate() const;
};

Matrix smooth(const Matrix& x, const Graph& g, const SmoothingConfig& cfg);

struct OutputQuery {
  Matrix values;  // M x D_q smoothed features, or 1 x D_q placeholder for graph tasks
  bool learnable = false;
  Task task = Task::Node;
};

/// Node/link: the smoothed feature matrix, D_q must equal C.
/// Graph: a 1 x D_q shape carrier; the model owns the learnable values.
OutputQuery build_output_query(Task task, const Graph& g, const SmoothingConfig& smoothing, std::size_t d_q);

}  // namespace gpio
