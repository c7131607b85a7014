#pragma once

#include <span>
#include <vector>

namespace varlab::stats {

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-based),
// with p = 0 mapping to the minimum. Throws on empty input or p outside
// [0, 100].
double nearest_rank(std::span<const double> values, double percentile);

// Average (mid) ranks, 1-based, ties share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> values);

double pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson correlation of mid-ranks. Throws kInputShape on length mismatch or
// fewer than 3 values, kUndefinedCorrelation when either side has no rank
// variance.
double spearman(std::span<const double> xs, std::span<const double> ys);

// Base-2 Shannon entropy of a probability vector, 0 log 0 = 0.
double entropy_bits(std::span<const double> probs);

double mean(std::span<const double> values);

}  // namespace varlab::stats
