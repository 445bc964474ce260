#pragma once

#include <span>
#include <string>
#include <vector>

#include "cetn/autodiff.hpp"
#include "cetn/rng.hpp"

namespace cetn {

enum class Act { LeakyRelu, Relu, Tanh, Sigmoid, None };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);
Var apply_act(Var v, Act a);

/// Dense stack: affine layers with hidden_act between them and output_act on
/// the last layer's output.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden = {400, 400, 400};
  int output_dim = 1;
  Act hidden_act = Act::LeakyRelu;
  Act output_act = Act::None;

  std::vector<std::pair<int, int>> layer_dims() const;  // (in, out) per affine
  long long param_count() const;                        // weights + biases
};

/// Named, persistent parameter tensors. The tape holds per-batch leaf copies;
/// the store is what the optimizer updates and checkpoints serialize.
struct Param {
  std::string name;
  Mat value;
  bool sparse_rows = false;  // rows with zero gradient skip the Adam update
};

class ParamStore {
 public:
  int add(std::string name, Mat value, bool sparse_rows = false);
  Param& at(int i) { return params_.at(i); }
  const Param& at(int i) const { return params_.at(i); }
  int find(const std::string& name) const;  // -1 when absent
  size_t size() const { return params_.size(); }
  long long total_elems() const;

  /// Place every parameter on a tape as a leaf, in store order.
  std::vector<Var> place(Tape& t) const;

  std::vector<Mat> snapshot() const;
  void restore(const std::vector<Mat>& values);

 private:
  std::vector<Param> params_;
};

/// Ids into a ParamStore for one MLP.
struct MlpParams {
  std::vector<int> weights;
  std::vector<int> biases;
};

/// Glorot-uniform weights, zero biases.
MlpParams init_mlp(ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                   Rng& rng);

/// Forward through leaves previously placed in store order. Throws
/// NumericError naming the layer if an affine output is non-finite.
Var mlp_forward(const MlpSpec& spec, const MlpParams& ids,
                std::span<const Var> leaves, Var x, const std::string& name);

}  // namespace cetn
