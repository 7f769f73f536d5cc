#include "gpio/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gpio/errors.hpp"

namespace gpio {

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
  if (mask.empty()) throw ShapeError("accuracy: empty mask");
  if (labels.size() != logits.rows) throw ShapeError("accuracy: label count does not match logit rows");
  std::size_t correct = 0;
  for (auto i : mask) {
    if (i >= logits.rows) throw ShapeError("accuracy: mask index out of range");
    auto row = logits.row(i);
    // max_element returns the first maximum: lowest index wins ties.
    auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

namespace {
void check_binary(std::span<const double> scores, std::span<const int> labels, const char* who) {
  if (scores.size() != labels.size()) throw ShapeError(std::string(who) + ": scores and labels differ in length");
  for (int l : labels)
    if (l != 0 && l != 1) throw ShapeError(std::string(who) + ": labels must be 0 or 1");
}
}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of average (1-based) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw ShapeError("roc_auc: needs at least one positive and one negative");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels, "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] == 1) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) throw ShapeError("average_precision: no positive examples");
  return total / static_cast<double>(hits);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

}  // namespace gpio
