#pragma once

#include <vector>

#include "cetn/mlp.hpp"

namespace cetn {

/// Adam with bias correction. Parameters flagged sparse_rows (embedding
/// tables) are updated lazily: rows whose gradient is exactly zero keep
/// their values and moment slots untouched that step.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const ParamStore& store);

  /// grads is store-aligned; an empty (0x0) gradient means "no contribution"
  /// and leaves the parameter untouched. Throws NumericError naming the
  /// parameter on a non-finite gradient.
  void step(ParamStore& store, const std::vector<Mat>& grads, double lr);

  long long steps() const { return t_; }

 private:
  std::vector<Mat> m_, v_;
  long long t_ = 0;
};

}  // namespace cetn
