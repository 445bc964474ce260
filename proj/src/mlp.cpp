#include "cetn/mlp.hpp"

#include <cmath>

namespace cetn {

Act act_from_string(const std::string& s) {
  if (s == "leaky_relu") return Act::LeakyRelu;
  if (s == "relu") return Act::Relu;
  if (s == "tanh") return Act::Tanh;
  if (s == "sigmoid") return Act::Sigmoid;
  if (s == "none") return Act::None;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::LeakyRelu: return "leaky_relu";
    case Act::Relu: return "relu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
    case Act::None: return "none";
  }
  return "?";
}

Var apply_act(Var v, Act a) {
  switch (a) {
    case Act::LeakyRelu: return leaky_relu(v);
    case Act::Relu: return relu(v);
    case Act::Tanh: return tanh(v);
    case Act::Sigmoid: return sigmoid(v);
    case Act::None: return v;
  }
  return v;
}

std::vector<std::pair<int, int>> MlpSpec::layer_dims() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("mlp: dims must be >= 1");
  std::vector<std::pair<int, int>> dims;
  int in = input_dim;
  for (int h : hidden) {
    if (h < 1) throw ConfigError("mlp: hidden dims must be >= 1");
    dims.emplace_back(in, h);
    in = h;
  }
  dims.emplace_back(in, output_dim);
  return dims;
}

long long MlpSpec::param_count() const {
  long long n = 0;
  for (auto [in, out] : layer_dims()) n += static_cast<long long>(in) * out + out;
  return n;
}

int ParamStore::add(std::string name, Mat value, bool sparse_rows) {
  if (find(name) >= 0) throw ContractError("param '" + name + "' already registered");
  params_.push_back(Param{std::move(name), std::move(value), sparse_rows});
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

long long ParamStore::total_elems() const {
  long long n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<Var> ParamStore::place(Tape& t) const {
  std::vector<Var> leaves;
  leaves.reserve(params_.size());
  for (const auto& p : params_) leaves.push_back(t.leaf(p.value, p.name.c_str()));
  return leaves;
}

std::vector<Mat> ParamStore::snapshot() const {
  std::vector<Mat> values;
  values.reserve(params_.size());
  for (const auto& p : params_) values.push_back(p.value);
  return values;
}

void ParamStore::restore(const std::vector<Mat>& values) {
  if (values.size() != params_.size()) {
    throw ContractError("restore: snapshot has " + std::to_string(values.size()) +
                        " tensors, store has " + std::to_string(params_.size()));
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params_[i].value.rows() ||
        values[i].cols() != params_[i].value.cols()) {
      throw ContractError("restore: shape mismatch for '" + params_[i].name + "'");
    }
    params_[i].value = values[i];
  }
}

MlpParams init_mlp(ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                   Rng& rng) {
  MlpParams ids;
  int layer = 0;
  for (auto [in, out] : spec.layer_dims()) {
    const double bound = std::sqrt(6.0 / (in + out));
    Mat w(in, out);
    for (int r = 0; r < in; ++r) {
      for (int c = 0; c < out; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    const std::string tag = prefix + ".l" + std::to_string(layer++);
    ids.weights.push_back(store.add(tag + ".w", std::move(w)));
    ids.biases.push_back(store.add(tag + ".b", Mat::Zero(1, out)));
  }
  return ids;
}

Var mlp_forward(const MlpSpec& spec, const MlpParams& ids,
                std::span<const Var> leaves, Var x, const std::string& name) {
  const auto dims = spec.layer_dims();
  if (x.shape().cols() != spec.input_dim) {
    throw DimensionError("mlp " + name + ": input " + x.shape().str() + ", want width " +
                         std::to_string(spec.input_dim));
  }
  Var h = x;
  for (size_t l = 0; l < dims.size(); ++l) {
    Var z = add_rowvec(matmul(h, leaves[ids.weights[l]]), leaves[ids.biases[l]]);
    if (!z.value().allFinite()) {
      throw NumericError("non-finite activation in " + name + " layer " + std::to_string(l));
    }
    h = apply_act(z, l + 1 < dims.size() ? spec.hidden_act : spec.output_act);
  }
  return h;
}

}  // namespace cetn
