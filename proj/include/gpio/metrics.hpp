#pragma once

#include <cstddef>
#include <span>

#include "gpio/matrix.hpp"

namespace gpio {

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const std::size_t> mask);

/// P(random positive outscores random negative), ties counted 1/2. Rank based,
/// O(n log n). labels are 0/1; both classes must be present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Mean of precision@rank over positives, scores sorted descending with ties
/// kept in input order.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
};

/// Sorts a copy before reducing so the result does not depend on input order.
MeanStd mean_std(std::span<const double> values);

}  // namespace gpio
