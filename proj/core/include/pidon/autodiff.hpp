#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation applied to its variables. Values are Eigen
// matrices whose rows are batch members; backward() propagates the adjoint of
// a scalar (1x1) result to every node that depends on a variable leaf.
// Accumulation follows the reverse creation order, so gradients are
// bit-reproducible.

#include <functional>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

namespace pidon::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Handle to a node of a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_{nullptr};
  int id_{-1};
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient tracking.
  Var constant(Mat value);
  /// Leaf whose gradient is accumulated by backward().
  Var variable(Mat value);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws GraphError if `loss` is
  /// not 1x1 or belongs to another tape. May be called once per tape.
  void backward(const Var& loss);

  /// Gradient of the last backward() target w.r.t. `v`; a zero matrix of the
  /// right shape when `v` does not influence it.
  Mat grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by the operation implementations.
  /// Receives the adjoint and the value of the node being differentiated.
  using Backward = std::function<void(Tape&, const Mat& out_grad, const Mat& out_value)>;
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);
  Var record(Mat value, const std::vector<Var>& parents, Backward backward);
  void accumulate(const Var& v, const Mat& g);
  bool tracks(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }
  const Mat& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  void check_owner(const Var& v) const;

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad{false};
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool backward_done_{false};
};

// -- linear algebra ---------------------------------------------------------

/// x * w^T for x (n x in), w (out x in).
Var matmul_nt(const Var& x, const Var& w);
/// x + row broadcast to every row; row is 1 x cols.
Var add_row(const Var& x, const Var& row);
/// x * w^T + b.
Var affine(const Var& x, const Var& w, const Var& b);

// -- elementwise ------------------------------------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);

Var tanh(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var square(const Var& x);
/// (1 - a^2) * adot: tangent of tanh given its output a and input tangent adot.
Var tanh_tangent(const Var& a, const Var& adot);
/// x * s per column, s constant (1 x cols).
Var scale_cols(const Var& x, const Eigen::RowVectorXd& s);
/// x + s per column, s constant (1 x cols).
Var shift_cols(const Var& x, const Eigen::RowVectorXd& s);

// -- structure --------------------------------------------------------------

/// Rows of x selected by idx (repetition allowed).
Var gather_rows(const Var& x, const std::vector<int>& idx);
/// Sums each of `blocks` contiguous column groups: (n x p) -> (n x blocks).
Var block_sum(const Var& x, Eigen::Index blocks);
/// Column j as n x 1.
Var col(const Var& x, Eigen::Index j);
/// Columns [first, first + count).
Var cols(const Var& x, Eigen::Index first, Eigen::Index count);
/// Horizontal concatenation; all parts share the row count.
Var hstack(const std::vector<Var>& parts);

// -- reductions -------------------------------------------------------------

Var sum(const Var& x);
Var mean(const Var& x);

}  // namespace pidon::ad
