#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cetn/autodiff.hpp"
#include "cetn/data.hpp"
#include "cetn/embedding.hpp"
#include "cetn/mlp.hpp"

namespace cetn {

enum class ModelKind { Cetn, SimMhn };

/// Architecture switches studied as ablations of the full model:
///   A   value MLPs all use relu instead of per-space activations
///   CL  contrastive loss weight forced to zero
///   COS cosine loss weights forced to zero
///   K   spatial weights fixed to 1 (the key MLPs are ignored)
///   P   auxiliary spaces consume the raw embeddings (no product/noise)
///   T   through connections removed (no "+V" into auxiliary outputs)
enum class Ablation { A, CL, COS, K, P, T };
using AblationSet = std::set<Ablation>;

Ablation ablation_from_string(const std::string& s);
std::string ablation_to_string(Ablation a);
ModelKind kind_from_string(const std::string& s);
std::string kind_to_string(ModelKind k);

struct ModelConfig {
  ModelKind kind = ModelKind::Cetn;
  AblationSet ablations;
  int embedding_dim = 20;  // d
  int value_dim = 64;      // d_v; forced to 1 for simMHN
  std::vector<int> hidden_dims = {400, 400, 400};
  /// Hidden activation of the value MLP per space (main, EP, IP). The key
  /// MLPs always use leaky_relu hidden layers and a leaky_relu output.
  std::array<Act, 3> space_acts = {Act::LeakyRelu, Act::Relu, Act::Tanh};
  bool fusion_shared = true;        // one (W, b) across spaces
  bool noise_field_shared = false;  // one d-vector of noise tiled over fields
  /// Feed the contrastive/cosine losses the auxiliary outputs before the
  /// through addition instead of the final space outputs.
  bool aux_loss_pre_through = false;

  bool ablated(Ablation a) const { return ablations.count(a) != 0; }
};

/// Everything the losses and diagnostics need from one forward pass.
/// Space order throughout: 0 = main (E), 1 = EP, 2 = IP.
struct ForwardResult {
  Var logit;                     // [B x 1]
  Var prob;                      // sigmoid(logit), [B x 1]
  std::array<Var, 3> space_v;    // final space outputs (after any through add)
  std::array<Var, 3> space_v_pre;  // auxiliary outputs before the through add
  std::array<Var, 3> space_k;    // spatial weights; undefined under -K
};

class Model {
 public:
  Model(ModelConfig cfg, std::vector<std::string> field_names,
        std::vector<int32_t> vocab_sizes, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& field_names() const { return field_names_; }
  const std::vector<int32_t>& vocab_sizes() const { return vocab_sizes_; }
  int fields() const { return static_cast<int>(field_names_.size()); }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Noise for one training pass, or nullopt when perturbation is disabled
  /// (simMHN, ablation P, or evaluation).
  std::optional<Mat> draw_noise(Rng* rng) const;

  /// Build the forward graph from leaves previously placed in store order.
  ForwardResult forward_from_leaves(Tape& t, const std::vector<Var>& leaves,
                                    const Batch& batch,
                                    const std::optional<Mat>& noise) const;

  /// Place parameters and run. noise_rng == nullptr gives the deterministic
  /// evaluation graph.
  ForwardResult forward(Tape& t, const Batch& batch, Rng* noise_rng,
                        std::vector<Var>* leaves_out = nullptr) const;

  /// Closed-form count over the MLP specs plus the fusion head; excludes
  /// embeddings (reported separately by embedding_param_count).
  long long param_count_formula() const;
  long long embedding_param_count() const;
  /// Independent counter iterating the actual tensors.
  long long param_count_actual() const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  struct Specs {
    MlpSpec v[3];
    MlpSpec k[3];
  };
  Specs build_specs() const;
  int aux_input_dim(int space) const;

  ModelConfig cfg_;
  std::vector<std::string> field_names_;
  std::vector<int32_t> vocab_sizes_;
  ParamStore store_;
  std::vector<int> emb_ids_;
  MlpParams v_ids_[3];
  MlpParams k_ids_[3];
  std::vector<int> fusion_w_ids_;  // one or three
  std::vector<int> fusion_b_ids_;
};

}  // namespace cetn
