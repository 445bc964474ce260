#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cetn/autodiff.hpp"
#include "cetn/model.hpp"

namespace cetn {

struct LossWeights {
  double alpha = 0.2;    // contrastive weight
  double beta_ep = 0.3;  // cosine weight, EP space
  double beta_ip = 0.3;  // cosine weight, IP space
  double tau = 0.2;      // temperature

  void validate() const;
};

/// Mean binary cross entropy of probabilities against 0/1 labels.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] inside the graph.
Var logloss_op(Var probs, std::span<const uint8_t> labels);

/// Rows scaled to unit norm. Rows with norm below 1e-12 are zeroed, so any
/// similarity they enter is 0.
Var normalize_rows_guarded(Var v);

/// Row-wise cosine similarity of paired rows, [B x 1].
Var cosine_rowwise(Var a, Var b);

/// mean_i (1 - sim(V_i, V'_i)).
Var cos_loss(Var v, Var vp);

/// Row-wise log sum_j exp(<a_i, b_j> / tau) for unit-norm inputs, without
/// ever materializing the [B x B] similarity matrix: forward and backward
/// walk row blocks and rebuild each block's similarities on the fly.
Var row_lse_xent(Var a_unit, Var b_unit, double tau);

/// Denominator-only contrastive loss:
///   mean_i [ logsumexp_j(sim(V'_i, V''_j)/tau) - 1/tau ]
/// with sim = cosine; the j sum includes j = i.
Var do_infonce(Var vp, Var vpp, double tau);

/// Standard form, mean over the batch:
///   mean_i [ logsumexp_j(sim_ij/tau) - sim_ii/tau ].
Var infonce(Var vp, Var vpp, double tau);

struct LossBreakdown {
  Var total;
  double total_v = 0.0;
  double ctr_v = 0.0;
  double cl_v = 0.0;      // unweighted component values; 0 when the term is off
  double cos_ep_v = 0.0;
  double cos_ip_v = 0.0;
};

/// total = ctr + alpha*cl + beta_ep*cos_ep + beta_ip*cos_ip. Terms switched
/// off by the variant (simMHN), the CL/COS ablations or a zero weight are
/// not built at all and contribute exactly 0.
LossBreakdown total_loss(const ForwardResult& fwd, std::span<const uint8_t> labels,
                         const LossWeights& weights, const ModelConfig& cfg);

}  // namespace cetn
