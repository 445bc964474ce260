#include "cetn/embedding.hpp"

#include <cmath>

namespace cetn {

Mat EmbeddingInit::table(Rng& rng, int32_t vocab_size, int dim) {
  Mat m(vocab_size, dim);
  for (int32_t r = 0; r < vocab_size; ++r) {
    for (int c = 0; c < dim; ++c) m(r, c) = rng.normal(0.0, 0.01);
  }
  return m;
}

Var lookup(std::span<const Var> field_tables, const Batch& batch, int dim) {
  if (field_tables.empty()) throw ContractError("lookup: no field tables");
  Tape& t = *field_tables[0].tape();
  const int f = batch.fields;
  if (static_cast<int>(field_tables.size()) != f) {
    throw DimensionError("lookup: " + std::to_string(field_tables.size()) +
                         " tables for " + std::to_string(f) + " fields");
  }
  const int b_rows = batch.batch_size;

  Mat out(b_rows, f * dim);
  for (int i = 0; i < f; ++i) {
    const Mat& table = field_tables[i].value();
    if (table.cols() != dim) {
      throw DimensionError("lookup: table " + std::to_string(i) + " has width " +
                           std::to_string(table.cols()) + ", want " + std::to_string(dim));
    }
    for (int b = 0; b < b_rows; ++b) {
      const int32_t idx = batch.indices[static_cast<size_t>(b) * f + i];
      if (idx < 0 || idx >= table.rows()) {
        throw ContractError("lookup: field " + std::to_string(i) + " index " +
                            std::to_string(idx) + " outside [0, " +
                            std::to_string(table.rows()) + ")");
      }
      out.block(b, i * dim, 1, dim) = table.row(idx);
    }
  }

  std::vector<int> table_ids;
  table_ids.reserve(field_tables.size());
  for (const Var& v : field_tables) table_ids.push_back(v.id());
  std::vector<int32_t> indices = batch.indices;

  return t.emplace(std::move(out), Shape(b_rows, f * dim), "lookup",
                   [table_ids, indices, f, dim, b_rows](Tape& tp, const Mat& g, const Mat&) {
                     for (int i = 0; i < f; ++i) {
                       const Mat& table = tp.value_of(table_ids[i]);
                       Mat dt = Mat::Zero(table.rows(), table.cols());
                       for (int b = 0; b < b_rows; ++b) {
                         const int32_t idx = indices[static_cast<size_t>(b) * f + i];
                         dt.row(idx) += g.block(b, i * dim, 1, dim);
                       }
                       tp.accumulate(table_ids[i], dt);
                     }
                   });
}

Mat draw_perturbation(Rng& rng, int fields, int dim, bool field_shared) {
  Mat delta(1, fields * dim);
  if (field_shared) {
    std::vector<double> shared(dim);
    for (int c = 0; c < dim; ++c) shared[c] = rng.uniform();
    for (int i = 0; i < fields; ++i) {
      for (int c = 0; c < dim; ++c) delta(0, i * dim + c) = shared[c];
    }
  } else {
    for (int k = 0; k < fields * dim; ++k) delta(0, k) = rng.uniform();
  }
  return delta;
}

Var perturb(Var e_batch, const Mat& delta) {
  Tape& t = *e_batch.tape();
  const Shape s = e_batch.shape();
  if (delta.rows() != 1 || delta.cols() != s.cols()) {
    throw DimensionError("perturb: noise [1x" + std::to_string(delta.cols()) +
                         "] does not match input " + s.str());
  }
  const Mat& e = e_batch.value();
  Mat out(e.rows(), e.cols());
  out.array() = e.array() + e.array().sign() * (Mat::Ones(e.rows(), 1) * delta).array();
  const int eid = e_batch.id();
  // d(e + delta*sign(e))/de = 1 almost everywhere; the noise is constant
  return t.emplace(std::move(out), s, "perturb",
                   [eid](Tape& tp, const Mat& g, const Mat&) { tp.accumulate(eid, g); });
}

std::vector<std::pair<int, int>> product_pairs(int fields) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(fields) * (fields + 1) / 2);
  for (int i = 0; i < fields; ++i) {
    for (int j = i; j < fields; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

namespace {

void check_reshape(const Shape& s, int fields, int dim, const char* op) {
  if (s.rank() != 2 || s.cols() != fields * dim) {
    throw DimensionError(std::string(op) + ": input " + s.str() + " is not [B x " +
                         std::to_string(fields) + "*" + std::to_string(dim) + "]");
  }
}

}  // namespace

Var pairwise_ep(Var e_batch, int fields, int dim) {
  Tape& t = *e_batch.tape();
  const Shape s = e_batch.shape();
  check_reshape(s, fields, dim, "pairwise_ep");
  const auto pairs = product_pairs(fields);
  const int b_rows = s.rows();
  const int p_count = static_cast<int>(pairs.size());

  const Mat& e = e_batch.value();
  Mat out(b_rows, p_count * dim);
  for (int p = 0; p < p_count; ++p) {
    const auto [i, j] = pairs[p];
    out.block(0, p * dim, b_rows, dim) =
        e.block(0, i * dim, b_rows, dim).cwiseProduct(e.block(0, j * dim, b_rows, dim));
  }

  const int eid = e_batch.id();
  return t.emplace(std::move(out), Shape(b_rows, p_count * dim), "pairwise_ep",
                   [eid, pairs, dim, b_rows](Tape& tp, const Mat& g, const Mat&) {
                     const Mat& e = tp.value_of(eid);
                     Mat de = Mat::Zero(e.rows(), e.cols());
                     for (size_t p = 0; p < pairs.size(); ++p) {
                       const auto [i, j] = pairs[p];
                       const auto gp = g.block(0, static_cast<int>(p) * dim, b_rows, dim);
                       de.block(0, i * dim, b_rows, dim) +=
                           gp.cwiseProduct(e.block(0, j * dim, b_rows, dim));
                       de.block(0, j * dim, b_rows, dim) +=
                           gp.cwiseProduct(e.block(0, i * dim, b_rows, dim));
                     }
                     tp.accumulate(eid, de);
                   });
}

Var pairwise_ip(Var e_batch, int fields, int dim) {
  Tape& t = *e_batch.tape();
  const Shape s = e_batch.shape();
  check_reshape(s, fields, dim, "pairwise_ip");
  const auto pairs = product_pairs(fields);
  const int b_rows = s.rows();
  const int p_count = static_cast<int>(pairs.size());

  const Mat& e = e_batch.value();
  Mat out(b_rows, p_count);
  for (int p = 0; p < p_count; ++p) {
    const auto [i, j] = pairs[p];
    out.col(p) = e.block(0, i * dim, b_rows, dim)
                     .cwiseProduct(e.block(0, j * dim, b_rows, dim))
                     .rowwise()
                     .sum();
  }

  const int eid = e_batch.id();
  return t.emplace(std::move(out), Shape(b_rows, p_count), "pairwise_ip",
                   [eid, pairs, dim, b_rows](Tape& tp, const Mat& g, const Mat&) {
                     const Mat& e = tp.value_of(eid);
                     Mat de = Mat::Zero(e.rows(), e.cols());
                     for (size_t p = 0; p < pairs.size(); ++p) {
                       const auto [i, j] = pairs[p];
                       const auto gp = g.col(static_cast<int>(p));
                       de.block(0, i * dim, b_rows, dim).array() +=
                           e.block(0, j * dim, b_rows, dim).array().colwise() * gp.array();
                       de.block(0, j * dim, b_rows, dim).array() +=
                           e.block(0, i * dim, b_rows, dim).array().colwise() * gp.array();
                     }
                     tp.accumulate(eid, de);
                   });
}

}  // namespace cetn
