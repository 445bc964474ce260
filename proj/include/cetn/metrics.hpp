#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cetn/common.hpp"

namespace cetn {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<uint8_t> labels;  // 0/1
};

/// Rank-based AUC (Mann-Whitney). Tied scores receive average ranks, which
/// matches giving half credit to tied positive/negative pairs. O(N log N).
/// Throws MetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const uint8_t> labels);
inline double auc(const ScoredSet& s) { return auc(s.scores, s.labels); }

/// Binary cross entropy of predicted probabilities against 0/1 labels.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
double logloss(std::span<const double> probs, std::span<const uint8_t> labels);

struct RelaImpr {
  double auc_pct;      // ((auc_t - 0.5) / (auc_b - 0.5) - 1) * 100
  double logloss_pct;  // ((ll_b - ll_t) / ll_b) * 100
};

/// Relative improvement of a target model over a base model.
/// Throws MetricError when the base AUC is not above 0.5.
RelaImpr relaimpr(double target_auc, double target_logloss, double base_auc,
                  double base_logloss);

}  // namespace cetn
