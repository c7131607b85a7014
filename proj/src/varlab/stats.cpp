#include "varlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varlab/error.hpp"

namespace varlab::stats {

double nearest_rank(std::span<const double> values, double percentile) {
  require(!values.empty(), ErrorCode::kEmptyInput, "percentile of an empty sample");
  require(percentile >= 0.0 && percentile <= 100.0, ErrorCode::kValidation,
          "percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<double> mid_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share rank mean((i+1)..(j+1)).
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean(std::span<const double> values) {
  require(!values.empty(), ErrorCode::kEmptyInput, "mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorCode::kInputShape, "correlation inputs differ in length");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::kUndefinedCorrelation,
          "correlation is undefined for a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorCode::kInputShape, "spearman inputs differ in length");
  require(xs.size() >= 3, ErrorCode::kInputShape, "spearman needs at least 3 pairs");
  const auto rx = mid_ranks(xs);
  const auto ry = mid_ranks(ys);
  return pearson(rx, ry);
}

double entropy_bits(std::span<const double> probs) {
  // Summed in sorted order so that permuted inputs give bit-identical
  // results; choice-count entropies tie exactly and Spearman must see ties.
  std::vector<double> sorted(probs.begin(), probs.end());
  std::sort(sorted.begin(), sorted.end());
  double h = 0.0;
  for (double p : sorted) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

}  // namespace varlab::stats
