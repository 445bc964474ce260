#include "cetn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cetn {

namespace {

[[noreturn]] void type_error(const std::string& key, const char* want) {
  throw ConfigError("config: '" + key + "' must be " + want);
}

std::string trim(std::string s) {
  const auto from = s.find_first_not_of(" \t");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t");
  return s.substr(from, to - from + 1);
}

bool parse_number(const std::string& s, double& d_out, long long& i_out, bool& is_int) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  long long i = 0;
  auto [pi, eci] = std::from_chars(b, e, i);
  if (eci == std::errc() && pi == e) {
    i_out = i;
    is_int = true;
    return true;
  }
  double d = 0;
  auto [pd, ecd] = std::from_chars(b, e, d);
  if (ecd == std::errc() && pd == e) {
    d_out = d;
    is_int = false;
    return true;
  }
  return false;
}

ConfigValue parse_scalar(const std::string& raw, const std::string& where,
                         bool bare_strings) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(where + ": empty value");
  if (s == "true") return {true};
  if (s == "false") return {false};
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError(where + ": unterminated string");
    return {s.substr(1, s.size() - 2)};
  }
  double d;
  long long i;
  bool is_int;
  if (parse_number(s, d, i, is_int)) {
    if (is_int) return {i};
    return {d};
  }
  if (bare_strings) return {s};  // override convenience: loss.alpha=0, model.variant=simmhn
  throw ConfigError(where + ": cannot parse value '" + s + "'");
}

ConfigValue parse_value(const std::string& raw, const std::string& where,
                        bool bare_strings) {
  const std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated array");
    std::vector<std::string> items;
    std::string body = s.substr(1, s.size() - 2);
    std::string cur;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        items.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty()) items.push_back(cur);
    std::vector<double> nums;
    std::vector<std::string> strs;
    bool numeric = true;
    for (const auto& item : items) {
      ConfigValue v = parse_scalar(item, where, bare_strings);
      if (std::holds_alternative<long long>(v.v)) {
        nums.push_back(static_cast<double>(std::get<long long>(v.v)));
        strs.push_back(std::get<long long>(v.v) ? "" : "");
      } else if (std::holds_alternative<double>(v.v)) {
        nums.push_back(std::get<double>(v.v));
      } else if (std::holds_alternative<std::string>(v.v)) {
        numeric = false;
        strs.push_back(std::get<std::string>(v.v));
      } else {
        throw ConfigError(where + ": unsupported array element");
      }
    }
    if (numeric) return {nums};
    if (strs.size() != items.size()) {
      throw ConfigError(where + ": arrays must be all numbers or all strings");
    }
    return {strs};
  }
  return parse_scalar(s, where, bare_strings);
}

}  // namespace

bool ConfigValue::as_bool(const std::string& key) const {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  type_error(key, "a boolean");
}

long long ConfigValue::as_int(const std::string& key) const {
  if (const long long* i = std::get_if<long long>(&v)) return *i;
  if (const double* d = std::get_if<double>(&v)) {
    if (*d == std::floor(*d)) return static_cast<long long>(*d);
  }
  type_error(key, "an integer");
}

double ConfigValue::as_double(const std::string& key) const {
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const long long* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
  type_error(key, "a number");
}

std::string ConfigValue::as_string(const std::string& key) const {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  type_error(key, "a string");
}

std::vector<double> ConfigValue::as_numbers(const std::string& key) const {
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  type_error(key, "an array of numbers");
}

std::vector<std::string> ConfigValue::as_strings(const std::string& key) const {
  if (const auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
  if (const auto* a = std::get_if<std::vector<double>>(&v)) {
    if (a->empty()) return {};
  }
  type_error(key, "an array of strings");
}

namespace {

std::string render_double(double d) {
  if (d == std::floor(d) && std::abs(d) < 1e15) {
    // keep a float marker so the value round-trips as a number
    std::ostringstream os;
    os << static_cast<long long>(d) << ".0";
    return os.str();
  }
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

std::string ConfigValue::render() const {
  std::ostringstream os;
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const long long* i = std::get_if<long long>(&v)) return std::to_string(*i);
  if (const double* d = std::get_if<double>(&v)) return render_double(*d);
  if (const std::string* s = std::get_if<std::string>(&v)) return '"' + *s + '"';
  if (const auto* a = std::get_if<std::vector<double>>(&v)) {
    os << '[';
    for (size_t i = 0; i < a->size(); ++i) os << (i ? ", " : "") << render_double((*a)[i]);
    os << ']';
    return os.str();
  }
  const auto& a = std::get<std::vector<std::string>>(v);
  os << '[';
  for (size_t i = 0; i < a.size(); ++i) os << (i ? ", " : "") << '"' << a[i] << '"';
  os << ']';
  return os.str();
}

FlatConfig parse_toml(const std::string& text, const std::string& origin) {
  FlatConfig out;
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    // strip comments outside strings
    std::string stripped;
    bool in_str = false;
    for (char c : line) {
      if (c == '"') in_str = !in_str;
      if (c == '#' && !in_str) break;
      stripped += c;
    }
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    out[full] = parse_value(stripped.substr(eq + 1), where, /*bare_strings=*/false);
  }
  return out;
}

FlatConfig parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_toml(text, path);
}

void apply_override(FlatConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + spec + "' is not key=value");
  }
  const std::string key = trim(spec.substr(0, eq));
  cfg[key] = parse_value(spec.substr(eq + 1), "override " + key, /*bare_strings=*/true);
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::resolve(const FlatConfig& flat) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  auto take = [&](const std::string& key) -> const ConfigValue* {
    seen.insert(key);
    auto it = flat.find(key);
    return it == flat.end() ? nullptr : &it->second;
  };

  if (const auto* v = take("data.dir")) cfg.data_dir = v->as_string("data.dir");

  if (const auto* v = take("model.variant")) {
    cfg.model.kind = kind_from_string(v->as_string("model.variant"));
  }
  if (const auto* v = take("model.ablations")) {
    for (const auto& s : v->as_strings("model.ablations")) {
      cfg.model.ablations.insert(ablation_from_string(s));
    }
  }
  if (const auto* v = take("model.embedding_dim")) {
    cfg.model.embedding_dim = static_cast<int>(v->as_int("model.embedding_dim"));
  }
  if (const auto* v = take("model.value_dim")) {
    cfg.model.value_dim = static_cast<int>(v->as_int("model.value_dim"));
  }
  if (const auto* v = take("model.hidden_dims")) {
    cfg.model.hidden_dims.clear();
    for (double d : v->as_numbers("model.hidden_dims")) {
      cfg.model.hidden_dims.push_back(static_cast<int>(d));
    }
  }
  if (const auto* v = take("model.activations")) {
    const auto acts = v->as_strings("model.activations");
    if (acts.size() != 3) {
      throw ConfigError("config: model.activations wants exactly 3 entries");
    }
    for (int i = 0; i < 3; ++i) cfg.model.space_acts[i] = act_from_string(acts[i]);
  }
  if (const auto* v = take("model.fusion_shared")) {
    cfg.model.fusion_shared = v->as_bool("model.fusion_shared");
  }
  if (const auto* v = take("model.noise_field_shared")) {
    cfg.model.noise_field_shared = v->as_bool("model.noise_field_shared");
  }
  if (const auto* v = take("model.aux_loss_pre_through")) {
    cfg.model.aux_loss_pre_through = v->as_bool("model.aux_loss_pre_through");
  }

  if (const auto* v = take("loss.alpha")) cfg.loss.alpha = v->as_double("loss.alpha");
  if (const auto* v = take("loss.beta_ep")) cfg.loss.beta_ep = v->as_double("loss.beta_ep");
  if (const auto* v = take("loss.beta_ip")) cfg.loss.beta_ip = v->as_double("loss.beta_ip");
  if (const auto* v = take("loss.tau")) cfg.loss.tau = v->as_double("loss.tau");

  if (const auto* v = take("train.lr")) cfg.trainer.lr = v->as_double("train.lr");
  if (const auto* v = take("train.batch_size")) {
    cfg.trainer.batch_size = static_cast<int>(v->as_int("train.batch_size"));
  }
  if (const auto* v = take("train.patience")) {
    cfg.trainer.patience = static_cast<int>(v->as_int("train.patience"));
  }
  if (const auto* v = take("train.max_epochs")) {
    cfg.trainer.max_epochs = static_cast<int>(v->as_int("train.max_epochs"));
  }
  if (const auto* v = take("train.seed")) {
    cfg.trainer.seed = static_cast<uint64_t>(v->as_int("train.seed"));
  }
  if (const auto* v = take("train.lr_decay")) {
    cfg.trainer.lr_decay = v->as_double("train.lr_decay");
  }
  if (const auto* v = take("train.eval_chunk")) {
    cfg.trainer.eval_chunk = static_cast<int>(v->as_int("train.eval_chunk"));
  }

  if (const auto* v = take("split.ratios")) {
    const auto r = v->as_numbers("split.ratios");
    if (r.size() != 3) throw ConfigError("config: split.ratios wants 3 entries");
    cfg.split.ratios = {r[0], r[1], r[2]};
  }
  if (const auto* v = take("split.seed")) {
    cfg.split.seed = static_cast<uint64_t>(v->as_int("split.seed"));
  }
  if (const auto* v = take("split.min_count")) {
    cfg.min_count = static_cast<int>(v->as_int("split.min_count"));
  }

  for (const auto& [key, value] : flat) {
    if (!seen.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.loss.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path,
                                             const std::vector<std::string>& overrides) {
  FlatConfig flat = parse_toml_file(path);
  for (const auto& o : overrides) apply_override(flat, o);
  return resolve(flat);
}

std::string ExperimentConfig::echo_toml() const {
  std::ostringstream os;
  os << "[data]\n";
  os << "dir = " << ConfigValue{data_dir}.render() << "\n\n";

  os << "[model]\n";
  os << "variant = \"" << kind_to_string(model.kind) << "\"\n";
  std::vector<std::string> abl;
  for (Ablation a : model.ablations) abl.push_back(ablation_to_string(a));
  os << "ablations = " << ConfigValue{abl}.render() << '\n';
  os << "embedding_dim = " << model.embedding_dim << '\n';
  os << "value_dim = " << model.value_dim << '\n';
  std::vector<double> hidden(model.hidden_dims.begin(), model.hidden_dims.end());
  os << "hidden_dims = " << ConfigValue{hidden}.render() << '\n';
  std::vector<std::string> acts;
  for (Act a : model.space_acts) acts.push_back(act_to_string(a));
  os << "activations = " << ConfigValue{acts}.render() << '\n';
  os << "fusion_shared = " << (model.fusion_shared ? "true" : "false") << '\n';
  os << "noise_field_shared = " << (model.noise_field_shared ? "true" : "false") << '\n';
  os << "aux_loss_pre_through = " << (model.aux_loss_pre_through ? "true" : "false")
     << "\n\n";

  os << "[loss]\n";
  os << "alpha = " << ConfigValue{loss.alpha}.render() << '\n';
  os << "beta_ep = " << ConfigValue{loss.beta_ep}.render() << '\n';
  os << "beta_ip = " << ConfigValue{loss.beta_ip}.render() << '\n';
  os << "tau = " << ConfigValue{loss.tau}.render() << "\n\n";

  os << "[train]\n";
  os << "lr = " << ConfigValue{trainer.lr}.render() << '\n';
  os << "batch_size = " << trainer.batch_size << '\n';
  os << "patience = " << trainer.patience << '\n';
  os << "max_epochs = " << trainer.max_epochs << '\n';
  os << "seed = " << trainer.seed << '\n';
  os << "lr_decay = " << ConfigValue{trainer.lr_decay}.render() << '\n';
  os << "eval_chunk = " << trainer.eval_chunk << "\n\n";

  os << "[split]\n";
  std::vector<double> ratios(split.ratios.begin(), split.ratios.end());
  os << "ratios = " << ConfigValue{ratios}.render() << '\n';
  os << "seed = " << split.seed << '\n';
  os << "min_count = " << min_count << '\n';
  return os.str();
}

}  // namespace cetn
