#include "cetn/adam.hpp"

#include <cmath>

namespace cetn {

Adam::Adam(const ParamStore& store) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    const Mat& p = store.at(static_cast<int>(i)).value;
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(ParamStore& store, const std::vector<Mat>& grads, double lr) {
  if (grads.size() != store.size()) {
    throw ContractError("adam: gradient list does not match parameter store");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));

  for (size_t i = 0; i < grads.size(); ++i) {
    const Mat& g = grads[i];
    if (g.size() == 0) continue;
    Param& p = store.at(static_cast<int>(i));
    if (!g.allFinite()) {
      throw NumericError("non-finite gradient for parameter '" + p.name + "'");
    }
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
      throw DimensionError("adam: gradient shape mismatch for '" + p.name + "'");
    }

    if (p.sparse_rows) {
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        if ((g.row(r).array() == 0.0).all()) continue;
        m_[i].row(r) = kBeta1 * m_[i].row(r) + (1.0 - kBeta1) * g.row(r);
        v_[i].row(r) = kBeta2 * v_[i].row(r) + (1.0 - kBeta2) * g.row(r).cwiseAbs2();
        p.value.row(r).array() -=
            lr * (m_[i].row(r).array() / c1) /
            ((v_[i].row(r).array() / c2).sqrt() + kEps);
      }
    } else {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseAbs2();
      p.value.array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + kEps);
    }
  }
}

}  // namespace cetn
