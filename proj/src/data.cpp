#include "cetn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cetn/rng.hpp"
#include "cetn/serialize.hpp"

namespace cetn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

namespace {

FieldKind parse_kind(const std::string& s) {
  if (s == "categorical") return FieldKind::Categorical;
  if (s == "numeric") return FieldKind::Numeric;
  if (s == "timestamp") return FieldKind::Timestamp;
  throw ConfigError("schema: unknown field kind '" + s + "'");
}

}  // namespace

DatasetSchema DatasetSchema::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema: invalid json: ") + e.what());
  }
  DatasetSchema s;
  s.label_column = j.value("label", "label");
  if (!j.contains("fields") || !j["fields"].is_array() || j["fields"].empty()) {
    throw ConfigError("schema: 'fields' must be a non-empty array");
  }
  for (const auto& f : j["fields"]) {
    FieldSchema fs;
    fs.name = f.at("name").get<std::string>();
    fs.kind = parse_kind(f.value("kind", "categorical"));
    s.fields.push_back(std::move(fs));
  }
  for (size_t i = 0; i < s.fields.size(); ++i) {
    for (size_t k = i + 1; k < s.fields.size(); ++k) {
      if (s.fields[i].name == s.fields[k].name) {
        throw ConfigError("schema: duplicate field name '" + s.fields[i].name + "'");
      }
    }
    if (s.fields[i].name == s.label_column) {
      throw ConfigError("schema: label column '" + s.label_column +
                        "' must not be listed as a field");
    }
  }
  return s;
}

DatasetSchema DatasetSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void DatasetSchema::resolve(const std::vector<std::string>& header) {
  auto find = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  if (find(label_column) < 0) {
    throw ConfigError("schema/header mismatch: label column '" + label_column +
                      "' not present in csv header");
  }
  for (auto& f : fields) {
    f.column_index = find(f.name);
    if (f.column_index < 0) {
      throw ConfigError("schema/header mismatch: column '" + f.name +
                        "' not present in csv header");
    }
  }
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

std::string discretize_numeric(double x) {
  if (!std::isfinite(x)) return "";
  if (x > 2.0) {
    const double l = std::log(x);
    return std::to_string(static_cast<long long>(std::floor(l * l)));
  }
  return "1";
}

std::string discretize_numeric(const std::string& cell) {
  if (cell.empty()) return "";
  try {
    size_t used = 0;
    const double x = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return discretize_numeric(x);
  } catch (const std::exception&) {
    throw ConfigError("numeric field: cannot parse '" + cell + "'");
  }
}

namespace {

// Hinnant's civil-days algorithm; 1970-01-01 is day 0, a Thursday.
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

}  // namespace

std::array<std::string, 3> expand_timestamp(const std::string& yymmddhh) {
  if (yymmddhh.size() != 8 ||
      !std::all_of(yymmddhh.begin(), yymmddhh.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError("timestamp field: expected 8 digits YYMMDDHH, got '" + yymmddhh + "'");
  }
  const int yy = std::stoi(yymmddhh.substr(0, 2));
  const int mm = std::stoi(yymmddhh.substr(2, 2));
  const int dd = std::stoi(yymmddhh.substr(4, 2));
  const int hh = std::stoi(yymmddhh.substr(6, 2));
  if (mm < 1 || mm > 12 || dd < 1 || dd > 31 || hh > 23) {
    throw ConfigError("timestamp field: out-of-range component in '" + yymmddhh + "'");
  }
  const long long days = days_from_civil(2000 + yy, mm, dd);
  const int weekday = static_cast<int>(((days % 7) + 7 + 3) % 7);  // 0 = Monday
  return {std::to_string(hh), std::to_string(weekday), weekday >= 5 ? "1" : "0"};
}

TokenTable TokenTable::select(std::span<const size_t> which) const {
  TokenTable out;
  out.field_names = field_names;
  out.rows.reserve(which.size());
  out.labels.reserve(which.size());
  for (size_t r : which) {
    out.rows.push_back(rows.at(r));
    out.labels.push_back(labels.at(r));
  }
  return out;
}

TokenTable tokenize(const CsvTable& csv, const DatasetSchema& schema) {
  for (const auto& f : schema.fields) {
    if (f.column_index < 0) throw ContractError("tokenize: schema not resolved");
  }
  const int label_col = [&] {
    for (size_t i = 0; i < csv.header.size(); ++i) {
      if (csv.header[i] == schema.label_column) return static_cast<int>(i);
    }
    throw ConfigError("tokenize: label column '" + schema.label_column + "' missing");
  }();

  TokenTable out;
  for (const auto& f : schema.fields) {
    if (f.kind == FieldKind::Timestamp) {
      out.field_names.push_back(f.name + "_hour");
      out.field_names.push_back(f.name + "_weekday");
      out.field_names.push_back(f.name + "_weekend");
    } else {
      out.field_names.push_back(f.name);
    }
  }

  out.rows.reserve(csv.rows.size());
  out.labels.reserve(csv.rows.size());
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& cells = csv.rows[r];
    const std::string& lab = cells[label_col];
    if (lab != "0" && lab != "1") {
      throw ConfigError("row " + std::to_string(r + 2) + ": label must be 0 or 1, got '" +
                        lab + "'");
    }
    std::vector<std::string> toks;
    toks.reserve(out.field_names.size());
    for (const auto& f : schema.fields) {
      const std::string& cell = cells[f.column_index];
      switch (f.kind) {
        case FieldKind::Categorical:
          toks.push_back(cell);
          break;
        case FieldKind::Numeric:
          try {
            toks.push_back(discretize_numeric(cell));
          } catch (const ConfigError&) {
            throw ConfigError("row " + std::to_string(r + 2) + ", column '" + f.name +
                              "': cannot parse numeric value '" + cell + "'");
          }
          break;
        case FieldKind::Timestamp: {
          auto parts = expand_timestamp(cell);
          toks.insert(toks.end(), parts.begin(), parts.end());
          break;
        }
      }
    }
    out.rows.push_back(std::move(toks));
    out.labels.push_back(lab == "1" ? 1 : 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

std::vector<Vocabulary> build_vocab(const TokenTable& train, int min_count) {
  if (train.rows.empty()) throw ConfigError("build_vocab: empty training split");
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  const size_t f = train.field_names.size();

  std::vector<Vocabulary> vocabs(f);
  for (size_t i = 0; i < f; ++i) {
    std::map<std::string, size_t> counts;  // ordered: lexicographic tie-break for free
    for (const auto& row : train.rows) {
      const std::string& tok = row[i];
      if (!tok.empty()) ++counts[tok];
    }
    std::vector<std::pair<std::string, size_t>> kept;
    kept.reserve(counts.size());
    for (auto& [tok, c] : counts) {
      if (c >= static_cast<size_t>(min_count)) kept.emplace_back(tok, c);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary& v = vocabs[i];
    v.min_count = min_count;
    v.token_to_index.reserve(kept.size());
    int32_t next = 1;  // 0 is OOV
    for (auto& [tok, c] : kept) v.token_to_index.emplace(tok, next++);
    v.size = next;
  }
  return vocabs;
}

void save_vocabs(const std::string& path, const std::vector<std::string>& field_names,
                 const std::vector<Vocabulary>& vocabs) {
  if (field_names.size() != vocabs.size()) {
    throw ContractError("save_vocabs: field/vocab count mismatch");
  }
  json j;
  j["field_order"] = field_names;
  json fields = json::object();
  for (size_t i = 0; i < vocabs.size(); ++i) {
    json tokens = json::object();
    for (const auto& [tok, idx] : vocabs[i].token_to_index) tokens[tok] = idx;
    fields[field_names[i]] = {{"size", vocabs[i].size},
                              {"min_count", vocabs[i].min_count},
                              {"tokens", std::move(tokens)}};
  }
  j["fields"] = std::move(fields);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << '\n';
}

std::pair<std::vector<std::string>, std::vector<Vocabulary>> load_vocabs(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid json: " + e.what());
  }
  std::vector<std::string> names = j.at("field_order").get<std::vector<std::string>>();
  std::vector<Vocabulary> vocabs;
  for (const auto& name : names) {
    const json& jf = j.at("fields").at(name);
    Vocabulary v;
    v.size = jf.at("size").get<int32_t>();
    v.min_count = jf.at("min_count").get<int>();
    for (auto it = jf.at("tokens").begin(); it != jf.at("tokens").end(); ++it) {
      v.token_to_index.emplace(it.key(), it.value().get<int32_t>());
    }
    if (static_cast<int32_t>(v.token_to_index.size()) + 1 != v.size) {
      throw IoError(path + ": field '" + name + "' token count does not match size");
    }
    vocabs.push_back(std::move(v));
  }
  return {std::move(names), std::move(vocabs)};
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

EncodedDataset encode(const TokenTable& rows, const std::vector<std::string>& field_names,
                      const std::vector<Vocabulary>& vocabs) {
  if (rows.field_names != field_names) {
    throw ContractError("encode: token table fields do not match vocabulary fields");
  }
  EncodedDataset ds;
  ds.field_names = field_names;
  for (const auto& v : vocabs) ds.vocab_sizes.push_back(v.size);
  const size_t f = field_names.size();
  ds.indices.resize(rows.size() * f);
  ds.labels = rows.labels;
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t i = 0; i < f; ++i) {
      ds.indices[r * f + i] = vocabs[i].encode(rows.rows[r][i]);
    }
  }
  return ds;
}

void EncodedDataset::validate() const {
  const size_t f = field_names.size();
  if (vocab_sizes.size() != f) throw ConfigError("dataset: vocab_sizes/fields mismatch");
  if (indices.size() != rows() * f) throw ConfigError("dataset: index matrix size mismatch");
  for (size_t r = 0; r < rows(); ++r) {
    for (size_t i = 0; i < f; ++i) {
      const int32_t idx = indices[r * f + i];
      if (idx < 0 || idx >= vocab_sizes[i]) {
        throw ConfigError("dataset: row " + std::to_string(r) + " field '" + field_names[i] +
                          "' index " + std::to_string(idx) + " outside [0, " +
                          std::to_string(vocab_sizes[i]) + ")");
      }
    }
    if (labels[r] > 1) throw ConfigError("dataset: label must be 0 or 1");
  }
}

void save_dataset(const std::string& path, const EncodedDataset& ds) {
  json h;
  h["format"] = "cetn-dataset";
  h["version"] = 1;
  h["rows"] = ds.rows();
  h["fields"] = ds.field_names;
  h["vocab_sizes"] = ds.vocab_sizes;
  std::vector<char> payload;
  payload.reserve(ds.indices.size() * 4 + ds.labels.size());
  append_bytes(payload, ds.indices.data(), ds.indices.size());
  append_bytes(payload, ds.labels.data(), ds.labels.size());
  write_blob_file(path, h.dump(), payload);
}

EncodedDataset load_dataset(const std::string& path) {
  BlobFile f = read_blob_file(path);
  json h;
  try {
    h = json::parse(f.header_json);
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid header: " + e.what());
  }
  if (h.value("format", "") != "cetn-dataset") {
    throw IoError(path + ": not a cetn dataset file");
  }
  EncodedDataset ds;
  const size_t rows = h.at("rows").get<size_t>();
  ds.field_names = h.at("fields").get<std::vector<std::string>>();
  ds.vocab_sizes = h.at("vocab_sizes").get<std::vector<int32_t>>();
  ds.indices.resize(rows * ds.field_names.size());
  ds.labels.resize(rows);
  read_bytes(f.payload, 0, ds.indices.data(), ds.indices.size());
  read_bytes(f.payload, ds.indices.size() * 4, ds.labels.data(), rows);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting and batching
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: ratios sum to " + std::to_string(sum) + ", want 1");
  }
}

SplitSizes split_sizes(size_t n, const std::array<double, 3>& ratios) {
  const auto b1 = static_cast<size_t>(std::floor(static_cast<long double>(n) * ratios[0]));
  const auto b2 = static_cast<size_t>(
      std::floor(static_cast<long double>(n) * (ratios[0] + ratios[1])));
  SplitSizes s{b1, b2 - b1, n - b2};
  if (s.train == 0 || s.val == 0 || s.test == 0) {
    throw ConfigError("split: a split is empty for n=" + std::to_string(n));
  }
  return s;
}

std::vector<size_t> split_permutation(size_t n, uint64_t seed) {
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(Rng::mix(seed, 0x73706c6974ULL));  // "split" stream
  rng.shuffle(perm);
  return perm;
}

SplitIndices split(size_t n, const SplitSpec& spec) {
  spec.validate();
  const SplitSizes sizes = split_sizes(n, spec.ratios);
  std::vector<size_t> perm = split_permutation(n, spec.seed);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + sizes.train);
  out.val.assign(perm.begin() + sizes.train, perm.begin() + sizes.train + sizes.val);
  out.test.assign(perm.begin() + sizes.train + sizes.val, perm.end());
  return out;
}

std::vector<std::vector<size_t>> epoch_batch_rows(size_t n, size_t batch_size,
                                                  uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batches: batch size must be >= 1");
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(Rng::mix(seed, 0x6261746368ULL + static_cast<uint64_t>(epoch)));
  rng.shuffle(perm);
  std::vector<std::vector<size_t>> batches;
  for (size_t at = 0; at < n; at += batch_size) {
    const size_t end = std::min(n, at + batch_size);
    batches.emplace_back(perm.begin() + at, perm.begin() + end);
  }
  return batches;
}

Batch gather_batch(const EncodedDataset& ds, std::span<const size_t> rows) {
  Batch b;
  b.fields = ds.fields();
  b.batch_size = static_cast<int>(rows.size());
  b.indices.reserve(rows.size() * b.fields);
  b.labels.reserve(rows.size());
  for (size_t r : rows) {
    auto row = ds.row(r);
    b.indices.insert(b.indices.end(), row.begin(), row.end());
    b.labels.push_back(ds.labels[r]);
  }
  return b;
}

}  // namespace cetn
