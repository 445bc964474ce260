#include "cetn/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace cetn {

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

void Shape::validate() const {
  if (dims_.empty() || dims_.size() > 2) {
    throw DimensionError("shape rank must be 1 or 2, got rank " +
                         std::to_string(dims_.size()));
  }
  for (int d : dims_) {
    if (d <= 0) throw DimensionError("shape dimensions must be positive, got " + str());
  }
}

long long Shape::elems() const {
  long long n = 1;
  for (int d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_storage(const Mat& m, const Shape& s, const char* op) {
  if (m.rows() != s.rows() || m.cols() != s.cols()) {
    throw DimensionError(std::string(op) + ": storage " +
                         Shape(static_cast<int>(m.rows()), static_cast<int>(m.cols())).str() +
                         " does not match declared shape " + s.str());
  }
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.str() +
                       " and " + b.str());
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.defined() || !b.defined()) throw ContractError(std::string(op) + ": undefined operand");
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands live on different tapes");
  return *a.tape();
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Tape
// ---------------------------------------------------------------------------

const Mat& Var::value() const { return tape_->value_of(id_); }
const Mat& Var::grad() const { return tape_->grad_of(id_); }
Shape Var::shape() const { return tape_->shape_of(id_); }

void Var::retain() const { tape_->nodes_[id_].retained = true; }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tape::Node& Tape::node(int id) { return nodes_.at(id); }
const Tape::Node& Tape::node(int id) const { return nodes_.at(id); }

Var Tape::leaf(Mat value, Shape shape, const char* op) {
  check_storage(value, shape, op);
  Node n;
  n.value = std::move(value);
  n.shape = shape;
  n.op = op;
  n.leaf = true;
  return push(std::move(n));
}

Var Tape::leaf(Mat value, const char* op) {
  Shape s(static_cast<int>(value.rows()), static_cast<int>(value.cols()));
  return leaf(std::move(value), s, op);
}

Var Tape::constant(Mat value, Shape shape, const char* op) {
  check_storage(value, shape, op);
  Node n;
  n.value = std::move(value);
  n.shape = shape;
  n.op = op;
  return push(std::move(n));
}

Var Tape::emplace(Mat value, Shape shape, const char* op, Backward backward) {
  check_storage(value, shape, op);
  Node n;
  n.value = std::move(value);
  n.shape = shape;
  n.op = op;
  if (recording_) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = node(id);
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

const Mat& Tape::value_of(int id) const { return node(id).value; }
const Mat& Tape::grad_of(int id) const { return node(id).grad; }
bool Tape::has_grad(int id) const { return node(id).grad.size() != 0; }
Shape Tape::shape_of(int id) const { return node(id).shape; }
const char* Tape::op_of(int id) const { return node(id).op; }

void Tape::backward(Var root) {
  if (!recording_) throw ContractError("backward: tape was built in inference mode");
  if (backward_done_) throw ContractError("backward: already run on this tape; rebuild the graph");
  if (root.tape() != this) throw ContractError("backward: root belongs to a different tape");
  if (!root.shape().scalar()) {
    throw ContractError("backward: root must be scalar shaped, got " + root.shape().str());
  }
  backward_done_ = true;

  Node& r = node(root.id());
  r.grad = Mat::Ones(r.value.rows(), r.value.cols());

  for (int k = static_cast<int>(nodes_.size()) - 1; k >= 0; --k) {
    Node& n = nodes_[k];
    if (n.grad.size() != 0 && n.backward) n.backward(*this, n.grad, n.value);
    if (!n.leaf && !n.retained) {
      // every consumer has run; these buffers cannot be read again
      n.value.resize(0, 0);
      n.grad.resize(0, 0);
      n.backward = nullptr;
    }
  }
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Tape& t = same_tape(a, b, "matmul");
  const Shape sa = a.shape(), sb = b.shape();
  const int m = trans_a ? sa.cols() : sa.rows();
  const int ka = trans_a ? sa.rows() : sa.cols();
  const int kb = trans_b ? sb.cols() : sb.rows();
  const int n = trans_b ? sb.rows() : sb.cols();
  if (ka != kb) shape_error("matmul", sa, sb);

  const Mat& A = a.value();
  const Mat& B = b.value();
  Mat v(m, n);
  if (!trans_a && !trans_b) v.noalias() = A * B;
  else if (!trans_a && trans_b) v.noalias() = A * B.transpose();
  else if (trans_a && !trans_b) v.noalias() = A.transpose() * B;
  else v.noalias() = A.transpose() * B.transpose();

  const int aid = a.id(), bid = b.id();
  return t.emplace(std::move(v), Shape(m, n), "matmul",
                   [aid, bid, trans_a, trans_b](Tape& tp, const Mat& g, const Mat&) {
                     const Mat& A = tp.value_of(aid);
                     const Mat& B = tp.value_of(bid);
                     Mat da, db;
                     if (!trans_a && !trans_b) {
                       da.noalias() = g * B.transpose();
                       db.noalias() = A.transpose() * g;
                     } else if (!trans_a && trans_b) {
                       da.noalias() = g * B;
                       db.noalias() = g.transpose() * A;
                     } else if (trans_a && !trans_b) {
                       da.noalias() = B * g.transpose();
                       db.noalias() = A * g;
                     } else {
                       da.noalias() = B.transpose() * g.transpose();
                       db.noalias() = g.transpose() * A.transpose();
                     }
                     tp.accumulate(aid, da);
                     tp.accumulate(bid, db);
                   });
}

// ---------------------------------------------------------------------------
// Elementwise binaries (identical shapes or scalar broadcast on either side)
// ---------------------------------------------------------------------------

namespace {

enum class Bin { Add, Sub, Mul, Div };

const char* bin_name(Bin k) {
  switch (k) {
    case Bin::Add: return "add";
    case Bin::Sub: return "sub";
    case Bin::Mul: return "mul";
    case Bin::Div: return "div";
  }
  return "?";
}

Var binary(Bin kind, Var a, Var b) {
  const char* name = bin_name(kind);
  Tape& t = same_tape(a, b, name);
  const Shape sa = a.shape(), sb = b.shape();
  const bool a_scalar = sa.scalar(), b_scalar = sb.scalar();
  if (sa != sb && !a_scalar && !b_scalar) shape_error(name, sa, sb);
  const Shape out_shape = a_scalar ? sb : sa;

  const Mat& A = a.value();
  const Mat& B = b.value();
  const double as = A(0, 0), bs = B(0, 0);

  Mat v;
  switch (kind) {
    case Bin::Add:
      v = a_scalar ? Mat(B.array() + as) : b_scalar ? Mat(A.array() + bs) : Mat(A + B);
      break;
    case Bin::Sub:
      v = a_scalar ? Mat(as - B.array()) : b_scalar ? Mat(A.array() - bs) : Mat(A - B);
      break;
    case Bin::Mul:
      v = a_scalar ? Mat(B * as) : b_scalar ? Mat(A * bs) : Mat(A.cwiseProduct(B));
      break;
    case Bin::Div:
      v = a_scalar ? Mat(as / B.array()) : b_scalar ? Mat(A / bs) : Mat(A.array() / B.array());
      break;
  }

  const int aid = a.id(), bid = b.id();
  return t.emplace(std::move(v), out_shape, name,
                   [kind, aid, bid, a_scalar, b_scalar](Tape& tp, const Mat& g, const Mat& y) {
                     const Mat& A = tp.value_of(aid);
                     const Mat& B = tp.value_of(bid);
                     auto acc = [&tp](int id, bool scalar, const Mat& full) {
                       if (scalar) {
                         Mat s(1, 1);
                         s(0, 0) = full.sum();
                         tp.accumulate(id, s);
                       } else {
                         tp.accumulate(id, full);
                       }
                     };
                     switch (kind) {
                       case Bin::Add:
                         acc(aid, a_scalar, g);
                         acc(bid, b_scalar, g);
                         break;
                       case Bin::Sub:
                         acc(aid, a_scalar, g);
                         acc(bid, b_scalar, Mat(-g));
                         break;
                       case Bin::Mul: {
                         Mat da = a_scalar ? Mat(g.cwiseProduct(B)) : b_scalar ? Mat(g * B(0, 0)) : Mat(g.cwiseProduct(B));
                         Mat db = b_scalar ? Mat(g.cwiseProduct(A)) : a_scalar ? Mat(g * A(0, 0)) : Mat(g.cwiseProduct(A));
                         acc(aid, a_scalar, da);
                         acc(bid, b_scalar, db);
                         break;
                       }
                       case Bin::Div: {
                         // y = A/B; dA = g/B, dB = -g*y/B
                         Mat da, db;
                         if (b_scalar) {
                           da = g / B(0, 0);
                           db = Mat(-(g.cwiseProduct(y)) / B(0, 0));
                         } else if (a_scalar) {
                           da = Mat(g.array() / B.array());
                           db = Mat(-(g.cwiseProduct(y)).array() / B.array());
                         } else {
                           da = Mat(g.array() / B.array());
                           db = Mat(-(g.cwiseProduct(y)).array() / B.array());
                         }
                         acc(aid, a_scalar, da);
                         acc(bid, b_scalar, db);
                         break;
                       }
                     }
                   });
}

}  // namespace

Var add(Var a, Var b) { return binary(Bin::Add, a, b); }
Var sub(Var a, Var b) { return binary(Bin::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Bin::Mul, a, b); }
Var div(Var a, Var b) { return binary(Bin::Div, a, b); }

// ---------------------------------------------------------------------------
// Elementwise unaries
// ---------------------------------------------------------------------------

namespace {

constexpr double kLeakySlope = 0.01;

/// dy/dx expressed from input x and output y, accumulated into the input.
template <typename Fwd, typename Bwd>
Var unary(Var v, const char* name, Fwd&& fwd, Bwd&& bwd) {
  Tape& t = *v.tape();
  Mat y = fwd(v.value());
  const int vid = v.id();
  return t.emplace(std::move(y), v.shape(), name,
                   [vid, bwd](Tape& tp, const Mat& g, const Mat& y) {
                     tp.accumulate(vid, bwd(tp.value_of(vid), y, g));
                   });
}

}  // namespace

Var leaky_relu(Var v) {
  return unary(
      v, "leaky_relu",
      [](const Mat& x) { return Mat((x.array() > 0).select(x, x * kLeakySlope)); },
      [](const Mat& x, const Mat&, const Mat& g) {
        return Mat((x.array() > 0).select(g, g * kLeakySlope));
      });
}

Var relu(Var v) {
  return unary(
      v, "relu",
      [](const Mat& x) { return Mat(x.cwiseMax(0.0)); },
      [](const Mat& x, const Mat&, const Mat& g) {
        return Mat((x.array() > 0).select(g, Mat::Zero(g.rows(), g.cols())));
      });
}

Var tanh(Var v) {
  return unary(
      v, "tanh",
      [](const Mat& x) { return Mat(x.array().tanh()); },
      [](const Mat&, const Mat& y, const Mat& g) {
        return Mat(g.array() * (1.0 - y.array().square()));
      });
}

Var sigmoid(Var v) {
  return unary(
      v, "sigmoid",
      [](const Mat& x) {
        // stable in both tails
        return Mat(x.array().unaryExpr([](double z) {
          if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
          const double e = std::exp(z);
          return e / (1.0 + e);
        }));
      },
      [](const Mat&, const Mat& y, const Mat& g) {
        return Mat(g.array() * y.array() * (1.0 - y.array()));
      });
}

Var log(Var v) {
  const double lo = v.value().size() ? v.value().minCoeff() : 1.0;
  if (lo <= 0.0) {
    throw DomainError("log: non-positive input (min value " + std::to_string(lo) + ")");
  }
  return unary(
      v, "log", [](const Mat& x) { return Mat(x.array().log()); },
      [](const Mat& x, const Mat&, const Mat& g) { return Mat(g.array() / x.array()); });
}

Var exp(Var v) {
  return unary(
      v, "exp", [](const Mat& x) { return Mat(x.array().exp()); },
      [](const Mat&, const Mat& y, const Mat& g) { return Mat(g.cwiseProduct(y)); });
}

Var sqrt(Var v) {
  const double lo = v.value().size() ? v.value().minCoeff() : 0.0;
  if (lo < 0.0) {
    throw DomainError("sqrt: negative input (min value " + std::to_string(lo) + ")");
  }
  return unary(
      v, "sqrt", [](const Mat& x) { return Mat(x.array().sqrt()); },
      [](const Mat&, const Mat& y, const Mat& g) {
        return Mat(g.array() * 0.5 / y.array());
      });
}

Var scale(Var v, double c) {
  Tape& t = *v.tape();
  const int vid = v.id();
  return t.emplace(Mat(v.value() * c), v.shape(), "scale",
                   [vid, c](Tape& tp, const Mat& g, const Mat&) {
                     tp.accumulate(vid, Mat(g * c));
                   });
}

Var offset(Var v, double c) {
  Tape& t = *v.tape();
  const int vid = v.id();
  return t.emplace(Mat(v.value().array() + c), v.shape(), "offset",
                   [vid](Tape& tp, const Mat& g, const Mat&) { tp.accumulate(vid, g); });
}

Var clamp(Var v, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  Tape& t = *v.tape();
  const int vid = v.id();
  return t.emplace(Mat(v.value().cwiseMax(lo).cwiseMin(hi)), v.shape(), "clamp",
                   [vid, lo, hi](Tape& tp, const Mat& g, const Mat&) {
                     const Mat& x = tp.value_of(vid);
                     Mat d = ((x.array() >= lo) && (x.array() <= hi))
                                 .select(g, Mat::Zero(g.rows(), g.cols()));
                     tp.accumulate(vid, d);
                   });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Var reduce(Reduce kind, Var v, std::optional<int> axis) {
  Tape& t = *v.tape();
  const Shape s = v.shape();
  const Mat& x = v.value();
  const int vid = v.id();
  const bool is_mean = kind == Reduce::Mean;

  if (axis && (*axis < 0 || *axis >= s.rank())) {
    throw DimensionError("reduce: axis " + std::to_string(*axis) +
                         " invalid for shape " + s.str());
  }

  // full reduction (explicit axis on a rank-1 value is the same thing)
  if (!axis || s.rank() == 1) {
    const double n = static_cast<double>(s.elems());
    Mat y(1, 1);
    y(0, 0) = is_mean ? x.sum() / n : x.sum();
    const Shape out = s.rank() == 1 ? Shape(1) : Shape(1, 1);
    return t.emplace(std::move(y), out, is_mean ? "mean" : "sum",
                     [vid, is_mean, n](Tape& tp, const Mat& g, const Mat&) {
                       const Shape in = tp.shape_of(vid);
                       const double w = is_mean ? g(0, 0) / n : g(0, 0);
                       tp.accumulate(vid, Mat(Mat::Constant(in.rows(), in.cols(), w)));
                     });
  }

  if (*axis == 0) {  // over rows -> [1 x cols]
    const double n = static_cast<double>(s.rows());
    Mat y = x.colwise().sum();
    if (is_mean) y /= n;
    return t.emplace(std::move(y), Shape(1, s.cols()), is_mean ? "mean" : "sum",
                     [vid, is_mean, n](Tape& tp, const Mat& g, const Mat&) {
                       const Shape in = tp.shape_of(vid);
                       Mat d = g.replicate(in.rows(), 1);
                       if (is_mean) d /= n;
                       tp.accumulate(vid, d);
                     });
  }

  // axis == 1: over columns -> [rows x 1]
  const double n = static_cast<double>(s.cols());
  Mat y = x.rowwise().sum();
  if (is_mean) y /= n;
  return t.emplace(std::move(y), Shape(s.rows(), 1), is_mean ? "mean" : "sum",
                   [vid, is_mean, n](Tape& tp, const Mat& g, const Mat&) {
                     const Shape in = tp.shape_of(vid);
                     Mat d = g.replicate(1, in.cols());
                     if (is_mean) d /= n;
                     tp.accumulate(vid, d);
                   });
}

// ---------------------------------------------------------------------------
// concat
// ---------------------------------------------------------------------------

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  if (axis != 0 && axis != 1) throw DimensionError("concat: axis must be 0 or 1");
  Tape& t = *parts[0].tape();

  bool all_rank1 = true;
  for (const Var& p : parts) all_rank1 = all_rank1 && p.shape().rank() == 1;

  // vectors joined end to end stay vectors
  if (all_rank1 && axis == 0) {
    int total = 0;
    for (const Var& p : parts) total += p.shape().cols();
    Mat y(1, total);
    int at = 0;
    std::vector<int> ids, widths;
    for (const Var& p : parts) {
      const int w = p.shape().cols();
      y.block(0, at, 1, w) = p.value();
      at += w;
      ids.push_back(p.id());
      widths.push_back(w);
    }
    return t.emplace(std::move(y), Shape(total), "concat",
                     [ids, widths](Tape& tp, const Mat& g, const Mat&) {
                       int at = 0;
                       for (size_t i = 0; i < ids.size(); ++i) {
                         tp.accumulate(ids[i], Mat(g.block(0, at, 1, widths[i])));
                         at += widths[i];
                       }
                     });
  }

  const int fixed = axis == 0 ? parts[0].shape().cols() : parts[0].shape().rows();
  int total = 0;
  for (const Var& p : parts) {
    const Shape sp = p.shape();
    const int f = axis == 0 ? sp.cols() : sp.rows();
    if (f != fixed) shape_error("concat", parts[0].shape(), sp);
    total += axis == 0 ? sp.rows() : sp.cols();
  }

  const int rows = axis == 0 ? total : fixed;
  const int cols = axis == 0 ? fixed : total;
  Mat y(rows, cols);
  int at = 0;
  std::vector<int> ids, extents;
  for (const Var& p : parts) {
    const Shape sp = p.shape();
    const int e = axis == 0 ? sp.rows() : sp.cols();
    if (axis == 0) y.block(at, 0, e, cols) = p.value();
    else y.block(0, at, rows, e) = p.value();
    at += e;
    ids.push_back(p.id());
    extents.push_back(e);
  }
  return t.emplace(std::move(y), Shape(rows, cols), "concat",
                   [ids, extents, axis](Tape& tp, const Mat& g, const Mat&) {
                     int at = 0;
                     for (size_t i = 0; i < ids.size(); ++i) {
                       if (axis == 0) tp.accumulate(ids[i], Mat(g.block(at, 0, extents[i], g.cols())));
                       else tp.accumulate(ids[i], Mat(g.block(0, at, g.rows(), extents[i])));
                       at += extents[i];
                     }
                   });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  std::vector<Var> v(parts);
  return concat(std::span<const Var>(v), axis);
}

// ---------------------------------------------------------------------------
// Broadcast helpers
// ---------------------------------------------------------------------------

Var add_rowvec(Var x, Var r) {
  Tape& t = same_tape(x, r, "add_rowvec");
  const Shape sx = x.shape(), sr = r.shape();
  if (sr.rows() != 1 || sr.cols() != sx.cols()) shape_error("add_rowvec", sx, sr);
  Mat y = x.value();
  y.array().rowwise() += r.value().row(0).array();
  const int xid = x.id(), rid = r.id();
  return t.emplace(std::move(y), sx, "add_rowvec",
                   [xid, rid](Tape& tp, const Mat& g, const Mat&) {
                     tp.accumulate(xid, g);
                     tp.accumulate(rid, Mat(g.colwise().sum()));
                   });
}

Var sub_colvec(Var x, Var c) {
  Tape& t = same_tape(x, c, "sub_colvec");
  const Shape sx = x.shape(), sc = c.shape();
  if (sc.cols() != 1 || sc.rows() != sx.rows()) shape_error("sub_colvec", sx, sc);
  Mat y = x.value();
  y.array().colwise() -= c.value().col(0).array();
  const int xid = x.id(), cid = c.id();
  return t.emplace(std::move(y), sx, "sub_colvec",
                   [xid, cid](Tape& tp, const Mat& g, const Mat&) {
                     tp.accumulate(xid, g);
                     tp.accumulate(cid, Mat(-g.rowwise().sum()));
                   });
}

Var div_colvec(Var x, Var c) {
  Tape& t = same_tape(x, c, "div_colvec");
  const Shape sx = x.shape(), sc = c.shape();
  if (sc.cols() != 1 || sc.rows() != sx.rows()) shape_error("div_colvec", sx, sc);
  Mat y = x.value();
  y.array().colwise() /= c.value().col(0).array();
  const int xid = x.id(), cid = c.id();
  return t.emplace(std::move(y), sx, "div_colvec",
                   [xid, cid](Tape& tp, const Mat& g, const Mat& y) {
                     const Mat& c = tp.value_of(cid);
                     Mat dx = g;
                     dx.array().colwise() /= c.col(0).array();
                     // dc_i = -sum_j g_ij * y_ij / c_i
                     Mat dc = -(g.cwiseProduct(y)).rowwise().sum();
                     dc.array().col(0) /= c.col(0).array();
                     tp.accumulate(xid, dx);
                     tp.accumulate(cid, dc);
                   });
}

Var logsumexp_rows(Var x) {
  Tape& t = *x.tape();
  const Shape sx = x.shape();
  if (sx.rank() != 2) throw DimensionError("logsumexp_rows: want rank 2, got " + sx.str());
  const Mat& X = x.value();
  Eigen::VectorXd m = X.rowwise().maxCoeff();
  Mat y(sx.rows(), 1);
  y.col(0) = ((X.array().colwise() - m.array()).exp().rowwise().sum()).log() + m.array();
  const int xid = x.id();
  return t.emplace(std::move(y), Shape(sx.rows(), 1), "logsumexp_rows",
                   [xid](Tape& tp, const Mat& g, const Mat& y) {
                     const Mat& X = tp.value_of(xid);
                     // softmax rows: exp(x - lse)
                     Mat dx = (X.array().colwise() - y.col(0).array()).exp();
                     dx.array().colwise() *= g.col(0).array();
                     tp.accumulate(xid, dx);
                   });
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const GraphBuilder& f, const std::vector<Mat>& params,
                           const std::vector<std::string>& names, double eps,
                           double tol) {
  if (params.size() != names.size()) {
    throw ContractError("grad_check: params and names differ in length");
  }

  std::vector<Mat> analytic(params.size());
  {
    Tape t(true);
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const Mat& p : params) leaves.push_back(t.leaf(p, "param"));
    Var root = f(t, leaves);
    if (!root.shape().scalar()) {
      throw ContractError("grad_check: builder must produce a scalar, got " +
                          root.shape().str());
    }
    t.backward(root);
    for (size_t i = 0; i < leaves.size(); ++i) {
      analytic[i] = t.has_grad(leaves[i].id())
                        ? leaves[i].grad()
                        : Mat(Mat::Zero(params[i].rows(), params[i].cols()));
    }
  }

  auto value_at = [&](const std::vector<Mat>& ps) {
    Tape t(false);
    std::vector<Var> leaves;
    leaves.reserve(ps.size());
    for (const Mat& p : ps) leaves.push_back(t.leaf(p, "param"));
    return f(t, leaves).value()(0, 0);
  };

  GradCheckReport report;
  std::vector<Mat> ps = params;
  for (size_t i = 0; i < params.size(); ++i) {
    GradCheckEntry entry;
    entry.name = names[i];
    for (Eigen::Index r = 0; r < params[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < params[i].cols(); ++c) {
        const double orig = ps[i](r, c);
        ps[i](r, c) = orig + eps;
        const double fp = value_at(ps);
        ps[i](r, c) = orig - eps;
        const double fm = value_at(ps);
        ps[i](r, c) = orig;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i](r, c);
        const double rel = std::abs(a - numeric) /
                           std::max({std::abs(a), std::abs(numeric), 1.0});
        entry.max_rel_err = std::max(entry.max_rel_err, rel);
      }
    }
    entry.ok = entry.max_rel_err < tol;
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.ok = report.ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cetn
