#include "cetn/model.hpp"

#include <nlohmann/json.hpp>

#include "cetn/serialize.hpp"

namespace cetn {

using json = nlohmann::json;

Ablation ablation_from_string(const std::string& s) {
  if (s == "A") return Ablation::A;
  if (s == "CL") return Ablation::CL;
  if (s == "COS") return Ablation::COS;
  if (s == "K") return Ablation::K;
  if (s == "P") return Ablation::P;
  if (s == "T") return Ablation::T;
  throw ConfigError("unknown ablation '" + s + "' (want A, CL, COS, K, P or T)");
}

std::string ablation_to_string(Ablation a) {
  switch (a) {
    case Ablation::A: return "A";
    case Ablation::CL: return "CL";
    case Ablation::COS: return "COS";
    case Ablation::K: return "K";
    case Ablation::P: return "P";
    case Ablation::T: return "T";
  }
  return "?";
}

ModelKind kind_from_string(const std::string& s) {
  if (s == "cetn") return ModelKind::Cetn;
  if (s == "simmhn") return ModelKind::SimMhn;
  throw ConfigError("unknown model kind '" + s + "' (want cetn or simmhn)");
}

std::string kind_to_string(ModelKind k) {
  return k == ModelKind::Cetn ? "cetn" : "simmhn";
}

int Model::aux_input_dim(int space) const {
  const int f = fields();
  const int d = cfg_.embedding_dim;
  if (cfg_.kind == ModelKind::Cetn && cfg_.ablated(Ablation::P)) return f * d;
  const int pairs = f * (f + 1) / 2;
  return space == 1 ? pairs * d : pairs;
}

Model::Specs Model::build_specs() const {
  const int f = fields();
  const int d = cfg_.embedding_dim;
  const bool simmhn = cfg_.kind == ModelKind::SimMhn;

  Specs s;
  for (int i = 0; i < 3; ++i) {
    const int in = i == 0 ? f * d : aux_input_dim(i);
    Act hidden = simmhn ? Act::LeakyRelu : cfg_.space_acts[i];
    if (!simmhn && cfg_.ablated(Ablation::A)) hidden = Act::Relu;

    s.v[i] = MlpSpec{in, cfg_.hidden_dims, simmhn ? 1 : cfg_.value_dim, hidden, Act::None};
    s.k[i] = MlpSpec{in, cfg_.hidden_dims, 1, Act::LeakyRelu, Act::LeakyRelu};
  }
  return s;
}

Model::Model(ModelConfig cfg, std::vector<std::string> field_names,
             std::vector<int32_t> vocab_sizes, uint64_t seed)
    : cfg_(std::move(cfg)),
      field_names_(std::move(field_names)),
      vocab_sizes_(std::move(vocab_sizes)) {
  if (field_names_.empty() || field_names_.size() != vocab_sizes_.size()) {
    throw ConfigError("model: field names and vocabulary sizes disagree");
  }
  if (cfg_.embedding_dim < 1 || cfg_.value_dim < 1) {
    throw ConfigError("model: embedding_dim and value_dim must be >= 1");
  }
  if (cfg_.kind == ModelKind::SimMhn) cfg_.value_dim = 1;

  Rng rng(Rng::mix(seed, 0x696e6974ULL));  // "init" stream

  for (size_t i = 0; i < field_names_.size(); ++i) {
    if (vocab_sizes_[i] < 1) throw ConfigError("model: vocabulary size must be >= 1");
    emb_ids_.push_back(store_.add("emb." + field_names_[i],
                                  EmbeddingInit::table(rng, vocab_sizes_[i], cfg_.embedding_dim),
                                  /*sparse_rows=*/true));
  }

  const Specs specs = build_specs();
  static const char* kSpace[3] = {"main", "ep", "ip"};
  for (int i = 0; i < 3; ++i) {
    v_ids_[i] = init_mlp(store_, specs.v[i], std::string(kSpace[i]) + ".v", rng);
    k_ids_[i] = init_mlp(store_, specs.k[i], std::string(kSpace[i]) + ".k", rng);
  }

  if (cfg_.kind == ModelKind::Cetn) {
    const int dv = cfg_.value_dim;
    const double bound = std::sqrt(6.0 / (dv + 1));
    const int heads = cfg_.fusion_shared ? 1 : 3;
    for (int h = 0; h < heads; ++h) {
      Mat w(dv, 1);
      for (int r = 0; r < dv; ++r) w(r, 0) = rng.uniform(-bound, bound);
      const std::string suffix = cfg_.fusion_shared ? "" : std::to_string(h);
      fusion_w_ids_.push_back(store_.add("fusion.w" + suffix, std::move(w)));
      fusion_b_ids_.push_back(store_.add("fusion.b" + suffix, Mat::Zero(1, 1)));
    }
  }
}

std::optional<Mat> Model::draw_noise(Rng* rng) const {
  if (rng == nullptr) return std::nullopt;
  if (cfg_.kind == ModelKind::SimMhn || cfg_.ablated(Ablation::P)) return std::nullopt;
  return draw_perturbation(*rng, fields(), cfg_.embedding_dim, cfg_.noise_field_shared);
}

ForwardResult Model::forward_from_leaves(Tape& t, const std::vector<Var>& leaves,
                                         const Batch& batch,
                                         const std::optional<Mat>& noise) const {
  if (leaves.size() != store_.size()) {
    throw ContractError("forward: leaf count does not match parameter store");
  }
  if (batch.fields != fields()) {
    throw DimensionError("forward: batch has " + std::to_string(batch.fields) +
                         " fields, model has " + std::to_string(fields()));
  }
  const int f = fields();
  const int d = cfg_.embedding_dim;
  const bool simmhn = cfg_.kind == ModelKind::SimMhn;
  const Specs specs = build_specs();

  std::vector<Var> tables;
  tables.reserve(emb_ids_.size());
  for (int id : emb_ids_) tables.push_back(leaves[id]);
  Var e_flat = lookup(tables, batch, d);

  // auxiliary space inputs
  Var ep_in, ip_in;
  if (cfg_.kind == ModelKind::Cetn && cfg_.ablated(Ablation::P)) {
    ep_in = e_flat;
    ip_in = e_flat;
  } else {
    Var source = e_flat;
    if (noise.has_value()) source = perturb(e_flat, *noise);
    ep_in = pairwise_ep(source, f, d);
    ip_in = pairwise_ip(source, f, d);
  }

  ForwardResult out;
  const Var inputs[3] = {e_flat, ep_in, ip_in};

  Var v_main = mlp_forward(specs.v[0], v_ids_[0], leaves, e_flat, "main.v");
  out.space_v[0] = v_main;
  out.space_v_pre[0] = v_main;
  for (int i = 1; i < 3; ++i) {
    static const char* kName[3] = {"", "ep.v", "ip.v"};
    Var pre = mlp_forward(specs.v[i], v_ids_[i], leaves, inputs[i], kName[i]);
    out.space_v_pre[i] = pre;
    // through connection: the main space's output flows into each auxiliary one
    out.space_v[i] = (simmhn || cfg_.ablated(Ablation::T)) ? pre : add(pre, v_main);
  }

  const bool use_k = !(cfg_.kind == ModelKind::Cetn && cfg_.ablated(Ablation::K));
  if (use_k) {
    static const char* kName[3] = {"main.k", "ep.k", "ip.k"};
    for (int i = 0; i < 3; ++i) {
      out.space_k[i] = mlp_forward(specs.k[i], k_ids_[i], leaves, inputs[i], kName[i]);
    }
  }

  // fusion: sum_i K_i * (W^T V_i + b); simMHN uses the raw scalar values
  Var logit;
  for (int i = 0; i < 3; ++i) {
    Var head;
    if (simmhn) {
      head = out.space_v[i];  // already [B x 1]
    } else {
      const size_t which = cfg_.fusion_shared ? 0 : i;
      head = add(matmul(out.space_v[i], leaves[fusion_w_ids_[which]]),
                 leaves[fusion_b_ids_[which]]);
    }
    Var term = use_k ? mul(out.space_k[i], head) : head;
    logit = i == 0 ? term : add(logit, term);
  }
  out.logit = logit;
  out.prob = sigmoid(logit);
  return out;
}

ForwardResult Model::forward(Tape& t, const Batch& batch, Rng* noise_rng,
                             std::vector<Var>* leaves_out) const {
  std::vector<Var> leaves = store_.place(t);
  ForwardResult r = forward_from_leaves(t, leaves, batch, draw_noise(noise_rng));
  if (leaves_out) *leaves_out = std::move(leaves);
  return r;
}

long long Model::param_count_formula() const {
  const Specs specs = build_specs();
  long long n = 0;
  for (int i = 0; i < 3; ++i) n += specs.v[i].param_count() + specs.k[i].param_count();
  if (cfg_.kind == ModelKind::Cetn) {
    n += static_cast<long long>(cfg_.fusion_shared ? 1 : 3) * (cfg_.value_dim + 1);
  }
  return n;
}

long long Model::embedding_param_count() const {
  long long n = 0;
  for (int32_t s : vocab_sizes_) n += static_cast<long long>(s) * cfg_.embedding_dim;
  return n;
}

long long Model::param_count_actual() const { return store_.total_elems(); }

// ---------------------------------------------------------------------------
// Checkpoints: one-line JSON header + row-major little-endian f64 payload.
// ---------------------------------------------------------------------------

void Model::save(const std::string& path) const {
  json h;
  h["format"] = "cetn-checkpoint";
  h["version"] = 1;
  h["kind"] = kind_to_string(cfg_.kind);
  json abl = json::array();
  for (Ablation a : cfg_.ablations) abl.push_back(ablation_to_string(a));
  h["ablations"] = std::move(abl);
  h["embedding_dim"] = cfg_.embedding_dim;
  h["value_dim"] = cfg_.value_dim;
  h["hidden_dims"] = cfg_.hidden_dims;
  json acts = json::array();
  for (Act a : cfg_.space_acts) acts.push_back(act_to_string(a));
  h["space_acts"] = std::move(acts);
  h["fusion_shared"] = cfg_.fusion_shared;
  h["noise_field_shared"] = cfg_.noise_field_shared;
  h["aux_loss_pre_through"] = cfg_.aux_loss_pre_through;
  json fields = json::array();
  for (size_t i = 0; i < field_names_.size(); ++i) {
    fields.push_back({{"name", field_names_[i]}, {"size", vocab_sizes_[i]}});
  }
  h["fields"] = std::move(fields);

  std::vector<char> payload;
  json params = json::array();
  size_t offset = 0;  // in doubles
  for (size_t i = 0; i < store_.size(); ++i) {
    const Param& p = store_.at(static_cast<int>(i));
    params.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"offset", offset}});
    append_bytes(payload, p.value.data(), static_cast<size_t>(p.value.size()));
    offset += static_cast<size_t>(p.value.size());
  }
  h["params"] = std::move(params);
  write_blob_file(path, h.dump(), payload);
}

Model Model::load(const std::string& path) {
  BlobFile f = read_blob_file(path);
  json h;
  try {
    h = json::parse(f.header_json);
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid checkpoint header: " + e.what());
  }
  if (h.value("format", "") != "cetn-checkpoint") {
    throw IoError(path + ": not a cetn checkpoint");
  }

  ModelConfig cfg;
  cfg.kind = kind_from_string(h.at("kind").get<std::string>());
  for (const auto& a : h.at("ablations")) {
    cfg.ablations.insert(ablation_from_string(a.get<std::string>()));
  }
  cfg.embedding_dim = h.at("embedding_dim").get<int>();
  cfg.value_dim = h.at("value_dim").get<int>();
  cfg.hidden_dims = h.at("hidden_dims").get<std::vector<int>>();
  const auto acts = h.at("space_acts").get<std::vector<std::string>>();
  if (acts.size() != 3) throw IoError(path + ": want 3 space activations");
  for (int i = 0; i < 3; ++i) cfg.space_acts[i] = act_from_string(acts[i]);
  cfg.fusion_shared = h.at("fusion_shared").get<bool>();
  cfg.noise_field_shared = h.at("noise_field_shared").get<bool>();
  cfg.aux_loss_pre_through = h.at("aux_loss_pre_through").get<bool>();

  std::vector<std::string> names;
  std::vector<int32_t> sizes;
  for (const auto& fld : h.at("fields")) {
    names.push_back(fld.at("name").get<std::string>());
    sizes.push_back(fld.at("size").get<int32_t>());
  }

  Model m(cfg, names, sizes, /*seed=*/0);
  for (const auto& jp : h.at("params")) {
    const std::string name = jp.at("name").get<std::string>();
    const int idx = m.store_.find(name);
    if (idx < 0) throw IoError(path + ": unexpected parameter '" + name + "'");
    Param& p = m.store_.at(idx);
    const auto rows = jp.at("rows").get<Eigen::Index>();
    const auto cols = jp.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw IoError(path + ": parameter '" + name + "' has shape " + std::to_string(rows) +
                    "x" + std::to_string(cols) + ", model wants " +
                    std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    const size_t offset = jp.at("offset").get<size_t>();
    read_bytes(f.payload, offset * sizeof(double), p.value.data(),
               static_cast<size_t>(p.value.size()));
  }
  return m;
}

}  // namespace cetn
