#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cetn/common.hpp"
#include "cetn/csv.hpp"

namespace cetn {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class FieldKind { Categorical, Numeric, Timestamp };

struct FieldSchema {
  std::string name;
  FieldKind kind = FieldKind::Categorical;
  int column_index = -1;  // resolved against a csv header
};

struct DatasetSchema {
  std::string label_column = "label";
  std::vector<FieldSchema> fields;

  /// Parse {"label": "...", "fields": [{"name": ..., "kind": ...}, ...]}.
  static DatasetSchema from_json(const std::string& text);
  static DatasetSchema from_json_file(const std::string& path);

  /// Bind column indices; throws ConfigError naming the offending column.
  void resolve(const std::vector<std::string>& header);
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Criteo-style bucketing of a numeric cell: floor(ln(x)^2) for x > 2, the
/// token "1" for any other present value, and the empty (OOV-bound) token
/// for missing values.
std::string discretize_numeric(const std::string& cell);
std::string discretize_numeric(double x);

/// Avazu-style YYMMDDHH timestamp, expanded to {hour, weekday, weekend}
/// tokens. Weekday is 0=Monday..6=Sunday; weekend is "1" for Sat/Sun.
std::array<std::string, 3> expand_timestamp(const std::string& yymmddhh);

/// Rows of per-field tokens after numeric discretization and timestamp
/// expansion, with labels pulled out. Field order follows the schema, with a
/// timestamp field replaced in place by its three derived fields.
struct TokenTable {
  std::vector<std::string> field_names;
  std::vector<std::vector<std::string>> rows;
  std::vector<uint8_t> labels;

  size_t size() const { return rows.size(); }
  TokenTable select(std::span<const size_t> which) const;
};

TokenTable tokenize(const CsvTable& csv, const DatasetSchema& schema);

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct Vocabulary {
  static constexpr int32_t kOov = 0;

  std::unordered_map<std::string, int32_t> token_to_index;
  int32_t size = 1;  // including the OOV slot
  int min_count = 1;

  int32_t encode(const std::string& token) const {
    auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kOov : it->second;
  }
};

/// One vocabulary per field, counted on the given (training) rows only.
/// Tokens below min_count are dropped; indices are assigned by descending
/// frequency with lexicographic tie-break; index 0 is reserved for OOV.
/// The empty token never enters a vocabulary.
std::vector<Vocabulary> build_vocab(const TokenTable& train, int min_count);

void save_vocabs(const std::string& path, const std::vector<std::string>& field_names,
                 const std::vector<Vocabulary>& vocabs);
std::pair<std::vector<std::string>, std::vector<Vocabulary>> load_vocabs(
    const std::string& path);

// ---------------------------------------------------------------------------
// Encoded data
// ---------------------------------------------------------------------------

struct EncodedDataset {
  std::vector<std::string> field_names;
  std::vector<int32_t> vocab_sizes;   // s_i per field
  std::vector<int32_t> indices;       // row-major [N x f]
  std::vector<uint8_t> labels;        // 0/1 [N]

  size_t rows() const { return labels.size(); }
  int fields() const { return static_cast<int>(field_names.size()); }
  int32_t at(size_t row, int field) const { return indices[row * field_names.size() + field]; }
  std::span<const int32_t> row(size_t r) const {
    return {indices.data() + r * field_names.size(), field_names.size()};
  }
  void validate() const;  // every index within its field's vocabulary
};

EncodedDataset encode(const TokenTable& rows, const std::vector<std::string>& field_names,
                      const std::vector<Vocabulary>& vocabs);

void save_dataset(const std::string& path, const EncodedDataset& ds);
EncodedDataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Splitting and batching
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::array<double, 3> ratios{0.7, 0.2, 0.1};  // train / val / test
  uint64_t seed = 42;

  void validate() const;  // ratios non-negative, summing to 1 within 1e-9
};

struct SplitSizes {
  size_t train, val, test;
};

/// Cumulative-floor boundaries: train gets rows [0, floor(n*r0)), validation
/// up to floor(n*(r0+r1)), test the rest. A function of (ratios, n) only.
SplitSizes split_sizes(size_t n, const std::array<double, 3>& ratios);

/// Seeded shuffle of 0..n-1; combined with split_sizes this partitions a
/// dataset as a function of (seed, n) only.
std::vector<size_t> split_permutation(size_t n, uint64_t seed);

struct SplitIndices {
  std::vector<size_t> train, val, test;
};
SplitIndices split(size_t n, const SplitSpec& spec);

struct Batch {
  std::vector<int32_t> indices;  // row-major [B x f]
  std::vector<uint8_t> labels;
  int batch_size = 0;
  int fields = 0;
};

/// Deterministic batch order for one epoch: a reshuffle keyed by
/// (seed, epoch), sliced into batches of at most batch_size rows. Every row
/// appears exactly once.
std::vector<std::vector<size_t>> epoch_batch_rows(size_t n, size_t batch_size,
                                                  uint64_t seed, int epoch);
Batch gather_batch(const EncodedDataset& ds, std::span<const size_t> rows);

}  // namespace cetn
