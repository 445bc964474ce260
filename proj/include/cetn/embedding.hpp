#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cetn/autodiff.hpp"
#include "cetn/data.hpp"
#include "cetn/rng.hpp"

namespace cetn {

/// Per-field embedding matrices, one row per vocabulary entry.
struct EmbeddingInit {
  /// Zero-mean Gaussian with standard deviation 0.01.
  static Mat table(Rng& rng, int32_t vocab_size, int dim);
};

/// Differentiable gather of batch rows out of per-field tables. The tables
/// must be leaf Vars of shape [s_i x d] on the same tape. Result is
/// [B x f*d], row b the concatenation of each field's embedding vector.
/// Backward accumulates only into the rows a batch actually touched;
/// a duplicated index accumulates once per occurrence.
Var lookup(std::span<const Var> field_tables, const Batch& batch, int dim);

/// Noise for one forward pass: U(0,1) per coordinate of the [f x d] block,
/// flattened to [1 x f*d]. With field_shared, a single d-vector is drawn and
/// tiled across fields.
Mat draw_perturbation(Rng& rng, int fields, int dim, bool field_shared);

/// E' = E + delta (.)  sign(E), with delta a constant row broadcast across the
/// batch. sign(0) = 0, so exactly-zero coordinates stay untouched; every
/// other coordinate moves away from zero by less than 1.
Var perturb(Var e_batch, const Mat& delta);

/// Ordered interaction pairs (i, j), i <= j, lexicographic; f(f+1)/2 of them.
std::vector<std::pair<int, int>> product_pairs(int fields);

/// Hadamard blocks: [B x P*d], block p the elementwise product e_i (.) e_j.
Var pairwise_ep(Var e_batch, int fields, int dim);

/// Inner products: [B x P], column p the dot product <e_i, e_j>.
Var pairwise_ip(Var e_batch, int fields, int dim);

struct Products {
  Var ep;
  Var ip;
};
inline Products products(Var e_batch, int fields, int dim) {
  return {pairwise_ep(e_batch, fields, dim), pairwise_ip(e_batch, fields, dim)};
}

}  // namespace cetn
