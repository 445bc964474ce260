#include "cetn/losses.hpp"

#include <cmath>
#include <limits>

namespace cetn {

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss: temperature must be strictly positive");
  for (double w : {alpha, beta_ep, beta_ip}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("loss: weights must be finite and non-negative");
    }
  }
}

namespace {

constexpr double kProbClamp = 1e-7;
constexpr double kNormFloor = 1e-12;

Mat labels_to_col(std::span<const uint8_t> labels) {
  Mat y(static_cast<Eigen::Index>(labels.size()), 1);
  for (size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = labels[i];
  return y;
}

}  // namespace

Var logloss_op(Var probs, std::span<const uint8_t> labels) {
  Tape& t = *probs.tape();
  const Shape s = probs.shape();
  if (s.cols() != 1 || static_cast<size_t>(s.rows()) != labels.size()) {
    throw DimensionError("logloss: probabilities " + s.str() + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  Mat y = labels_to_col(labels);
  Var yv = t.constant(y, Shape(s.rows(), 1), "labels");
  Var ymv = t.constant(Mat(Mat::Ones(s.rows(), 1) - y), Shape(s.rows(), 1), "labels_neg");
  Var p = clamp(probs, kProbClamp, 1.0 - kProbClamp);
  Var ll = add(mul(yv, log(p)), mul(ymv, log(offset(scale(p, -1.0), 1.0))));
  return scale(mean(ll), -1.0);
}

Var normalize_rows_guarded(Var v) {
  Tape& t = *v.tape();
  Var nrm = sqrt(sum(mul(v, v), 1));  // [B x 1]
  Var safe = clamp(nrm, kNormFloor, std::numeric_limits<double>::infinity());
  Var unit = div_colvec(v, safe);
  // rows that were (numerically) zero vectors contribute similarity 0
  const Mat& n = nrm.value();
  bool any_zero = false;
  for (Eigen::Index i = 0; i < n.rows(); ++i) any_zero = any_zero || n(i, 0) < kNormFloor;
  if (!any_zero) return unit;
  Mat mask = Mat::Ones(v.shape().rows(), v.shape().cols());
  for (Eigen::Index i = 0; i < n.rows(); ++i) {
    if (n(i, 0) < kNormFloor) mask.row(i).setZero();
  }
  return mul(unit, t.constant(mask, v.shape(), "zero_norm_mask"));
}

Var cosine_rowwise(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("cosine: shapes " + a.shape().str() + " vs " + b.shape().str());
  }
  return sum(mul(normalize_rows_guarded(a), normalize_rows_guarded(b)), 1);
}

Var cos_loss(Var v, Var vp) {
  return mean(offset(scale(cosine_rowwise(v, vp), -1.0), 1.0));
}

Var row_lse_xent(Var a_unit, Var b_unit, double tau) {
  Tape& t = *a_unit.tape();
  const Shape sa = a_unit.shape(), sb = b_unit.shape();
  if (sa != sb || sa.rank() != 2) {
    throw DimensionError("row_lse_xent: shapes " + sa.str() + " vs " + sb.str());
  }
  if (!(tau > 0.0)) throw ConfigError("row_lse_xent: temperature must be positive");
  const int rows = sa.rows();
  const int block = 2048;

  const Mat& A = a_unit.value();
  const Mat& B = b_unit.value();
  Mat lse(rows, 1);
  for (int at = 0; at < rows; at += block) {
    const int n = std::min(block, rows - at);
    Mat s = (A.middleRows(at, n) * B.transpose()) / tau;  // [n x rows]
    Eigen::VectorXd m = s.rowwise().maxCoeff();
    lse.col(0).segment(at, n) =
        ((s.array().colwise() - m.array()).exp().rowwise().sum()).log() + m.array();
  }

  const int aid = a_unit.id(), bid = b_unit.id();
  return t.emplace(std::move(lse), Shape(rows, 1), "row_lse_xent",
                   [aid, bid, tau, block](Tape& tp, const Mat& g, const Mat& y) {
                     const Mat& A = tp.value_of(aid);
                     const Mat& B = tp.value_of(bid);
                     const int rows = static_cast<int>(A.rows());
                     Mat da = Mat::Zero(A.rows(), A.cols());
                     Mat db = Mat::Zero(B.rows(), B.cols());
                     for (int at = 0; at < rows; at += block) {
                       const int n = std::min(block, rows - at);
                       // p_ij = g_i/tau * exp(s_ij/tau - lse_i)
                       Mat p = (A.middleRows(at, n) * B.transpose()) / tau;
                       p.array().colwise() -= y.col(0).segment(at, n).array();
                       p = p.array().exp();
                       p.array().colwise() *= g.col(0).segment(at, n).array() / tau;
                       da.middleRows(at, n).noalias() = p * B;
                       db.noalias() += p.transpose() * A.middleRows(at, n);
                     }
                     tp.accumulate(aid, da);
                     tp.accumulate(bid, db);
                   });
}

Var do_infonce(Var vp, Var vpp, double tau) {
  if (!(tau > 0.0)) throw ConfigError("do_infonce: temperature must be positive");
  Var np = normalize_rows_guarded(vp);
  Var npp = normalize_rows_guarded(vpp);
  return offset(mean(row_lse_xent(np, npp, tau)), -1.0 / tau);
}

Var infonce(Var vp, Var vpp, double tau) {
  if (!(tau > 0.0)) throw ConfigError("infonce: temperature must be positive");
  Var np = normalize_rows_guarded(vp);
  Var npp = normalize_rows_guarded(vpp);
  Var lse = mean(row_lse_xent(np, npp, tau));
  Var aligned = mean(sum(mul(np, npp), 1));
  return sub(lse, scale(aligned, 1.0 / tau));
}

LossBreakdown total_loss(const ForwardResult& fwd, std::span<const uint8_t> labels,
                         const LossWeights& weights, const ModelConfig& cfg) {
  weights.validate();
  LossBreakdown out;
  Var ctr = logloss_op(fwd.prob, labels);
  out.ctr_v = ctr.value()(0, 0);
  Var total = ctr;

  const bool simmhn = cfg.kind == ModelKind::SimMhn;
  const bool want_cl = !simmhn && !cfg.ablated(Ablation::CL) && weights.alpha > 0.0;
  const bool want_cos = !simmhn && !cfg.ablated(Ablation::COS);

  const Var& aux_ep = cfg.aux_loss_pre_through ? fwd.space_v_pre[1] : fwd.space_v[1];
  const Var& aux_ip = cfg.aux_loss_pre_through ? fwd.space_v_pre[2] : fwd.space_v[2];

  if (want_cl) {
    Var cl = do_infonce(aux_ep, aux_ip, weights.tau);
    out.cl_v = cl.value()(0, 0);
    total = add(total, scale(cl, weights.alpha));
  }
  if (want_cos && weights.beta_ep > 0.0) {
    Var c1 = cos_loss(fwd.space_v[0], aux_ep);
    out.cos_ep_v = c1.value()(0, 0);
    total = add(total, scale(c1, weights.beta_ep));
  }
  if (want_cos && weights.beta_ip > 0.0) {
    Var c2 = cos_loss(fwd.space_v[0], aux_ip);
    out.cos_ip_v = c2.value()(0, 0);
    total = add(total, scale(c2, weights.beta_ip));
  }
  out.total = total;
  out.total_v = total.value()(0, 0);
  return out;
}

}  // namespace cetn
