#include "cetn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cetn {

double auc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (uint8_t y : labels) n_pos += y != 0;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc: undefined for single-class input (" +
                      std::to_string(n_pos) + " positives of " + std::to_string(n) + ")");
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // sum of average ranks (1-based) over positives
  double rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(std::span<const double> probs, std::span<const uint8_t> labels) {
  if (probs.size() != labels.size()) {
    throw DimensionError("logloss: " + std::to_string(probs.size()) + " probs vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) throw MetricError("logloss: empty input");
  constexpr double eps = 1e-7;
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = std::min(std::max(probs[i], eps), 1.0 - eps);
    total += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(probs.size());
}

RelaImpr relaimpr(double target_auc, double target_logloss, double base_auc,
                  double base_logloss) {
  if (base_auc <= 0.5) {
    throw MetricError("relaimpr: base AUC " + std::to_string(base_auc) +
                      " is not above the 0.5 random baseline");
  }
  if (base_logloss <= 0.0) {
    throw MetricError("relaimpr: base logloss must be positive");
  }
  return RelaImpr{
      ((target_auc - 0.5) / (base_auc - 0.5) - 1.0) * 100.0,
      (base_logloss - target_logloss) / base_logloss * 100.0,
  };
}

}  // namespace cetn
