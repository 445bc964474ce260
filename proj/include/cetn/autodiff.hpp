#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cetn/common.hpp"

namespace cetn {

/// Rank 1 or rank 2, row-major. Rank-1 values are stored as 1 x n matrices;
/// the rank is kept so errors and reductions report what the caller built.
class Shape {
 public:
  Shape() = default;
  explicit Shape(int n) : dims_{n} { validate(); }
  Shape(int rows, int cols) : dims_{rows, cols} { validate(); }

  int rank() const { return static_cast<int>(dims_.size()); }
  long long elems() const;
  int rows() const { return rank() == 1 ? 1 : dims_[0]; }
  int cols() const { return rank() == 1 ? dims_[0] : dims_[1]; }
  const std::vector<int>& dims() const { return dims_; }
  bool scalar() const { return elems() == 1; }

  std::string str() const;
  bool operator==(const Shape& o) const { return dims_ == o.dims_; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

 private:
  void validate() const;
  std::vector<int> dims_;
};

class Tape;

/// Handle to one node of a tape. Cheap to copy; valid only while the owning
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  const Mat& grad() const;
  Shape shape() const;
  bool defined() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

  /// Keep this node's value alive through backward (values of interior nodes
  /// are otherwise released as soon as the pass no longer needs them).
  void retain() const;

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode computation tape. Nodes are appended in evaluation order;
/// backward walks them in reverse, so every consumer runs before the
/// gradient of its producer is read. Confined to a single thread.
class Tape {
 public:
  /// recording=false builds values only (no backward closures); used for
  /// inference where gradients are never requested.
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Adjoint of one node: given the tape, the gradient that reached this
  /// node and the node's own output value, accumulate into the inputs.
  using Backward = std::function<void(Tape&, const Mat& g, const Mat& y)>;

  Var leaf(Mat value, Shape shape, const char* op = "leaf");
  Var leaf(Mat value, const char* op = "leaf");
  Var constant(Mat value, Shape shape, const char* op = "const");

  /// Append an interior node with its adjoint.
  Var emplace(Mat value, Shape shape, const char* op, Backward backward);

  /// Accumulate grad(root) = 1 through the whole graph. root must be scalar
  /// shaped; calling twice on one tape is a contract error.
  void backward(Var root);

  void accumulate(int id, const Mat& g);

  const Mat& value_of(int id) const;
  const Mat& grad_of(int id) const;
  /// True if any consumer contributed gradient to this node.
  bool has_grad(int id) const;
  Shape shape_of(int id) const;
  const char* op_of(int id) const;

  size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    Mat value;
    Mat grad;  // empty until a consumer accumulates into it
    Shape shape;
    const char* op;
    bool leaf = false;
    bool retained = false;
    Backward backward;
  };

  friend class Var;
  Var push(Node n);
  Node& node(int id);
  const Node& node(int id) const;

  std::vector<Node> nodes_;
  bool recording_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Operations. Each checks shapes up front and registers an exact adjoint.
// ---------------------------------------------------------------------------

/// op(a) * op(b) where op is optional transposition, BLAS style.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

// Elementwise binaries; identical shapes or one operand scalar (1 element).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// Elementwise unaries.
Var leaky_relu(Var v);  // negative slope fixed at 0.01
Var relu(Var v);
Var tanh(Var v);
Var sigmoid(Var v);
Var log(Var v);  // DomainError on non-positive input
Var exp(Var v);
Var sqrt(Var v);  // DomainError on negative input

// Affine-with-constant helpers.
Var scale(Var v, double c);   // c * v
Var offset(Var v, double c);  // v + c
/// Clamp into [lo, hi]; gradient passes where lo <= x <= hi.
Var clamp(Var v, double lo, double hi);

enum class Reduce { Sum, Mean };
/// axis absent: reduce everything to a scalar. axis 0: over rows, axis 1:
/// over columns. Mean divides by the reduced extent.
Var reduce(Reduce kind, Var v, std::optional<int> axis = std::nullopt);
inline Var sum(Var v, std::optional<int> axis = std::nullopt) {
  return reduce(Reduce::Sum, v, axis);
}
inline Var mean(Var v, std::optional<int> axis = std::nullopt) {
  return reduce(Reduce::Mean, v, axis);
}

/// Concatenate along axis (0 = rows, 1 = cols; rank-1 parts use axis 0).
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);

// Row/column broadcasts needed by the model graph.
Var add_rowvec(Var x, Var r);  // [m,n] + [1,n]
Var sub_colvec(Var x, Var c);  // [m,n] - [m,1]
Var div_colvec(Var x, Var c);  // [m,n] / [m,1]

/// Row-wise log(sum(exp(x))), computed as m + log(sum(exp(x - m))) with m
/// the row max, so large similarity/temperature ratios cannot overflow.
Var logsumexp_rows(Var x);

// ---------------------------------------------------------------------------
// Finite-difference verification.
// ---------------------------------------------------------------------------

/// Builds a scalar root from leaves placed on the given tape. Must be
/// deterministic in the leaf values (fix any noise outside the builder).
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool ok = true;
};

/// Compare the tape's gradients against central finite differences
/// (f(x+eps) - f(x-eps)) / 2eps for every entry of every parameter.
/// Relative error uses max(|analytic|, |numeric|, 1.0) as the scale so that
/// near-zero gradients are compared absolutely.
GradCheckReport grad_check(const GraphBuilder& f, const std::vector<Mat>& params,
                           const std::vector<std::string>& names, double eps,
                           double tol);

}  // namespace cetn
