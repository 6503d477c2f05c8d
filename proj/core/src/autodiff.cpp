#include "pidon/autodiff.hpp"

#include <string>

#include "pidon/errors.hpp"
#include "activation.hpp"

namespace pidon::ad {

const Mat& Var::value() const {
  if (tape_ == nullptr) throw GraphError("use of an unbound variable");
  return tape_->value_of(id_);
}

Var Tape::constant(Mat value) {
  nodes_.push_back({std::move(value), Mat(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Mat value) {
  nodes_.push_back({std::move(value), Mat(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::check_owner(const Var& v) const {
  if (v.tape() != this) throw GraphError("variable belongs to a different tape");
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(Mat value, const std::vector<Var>& parents, Backward backward) {
  bool needs_grad = false;
  for (const Var& p : parents) {
    check_owner(p);
    needs_grad = needs_grad || tracks(p);
  }
  nodes_.push_back({std::move(value), Mat(), needs_grad, needs_grad ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(const Var& v, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw GraphError("backward() needs a scalar (1x1) target, got " + std::to_string(loss.rows()) +
                     "x" + std::to_string(loss.cols()));
  }
  if (backward_done_) throw GraphError("backward() already ran on this tape");
  backward_done_ = true;
  const auto root = static_cast<std::size_t>(loss.id());
  if (!nodes_[root].requires_grad) return;
  nodes_[root].grad = Mat::Ones(1, 1);
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // Self-loops are impossible, so the adjoint is final here.
    const Mat g = n.grad;
    n.backward(*this, g, n.value);
  }
}

Mat Tape::grad(const Var& v) const {
  check_owner(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + " differ");
  }
}

}  // namespace

Var matmul_nt(const Var& x, const Var& w) {
  if (x.cols() != w.cols()) throw DimensionMismatch("matmul_nt: inner dimensions differ");
  Tape& t = *x.tape();
  return t.record(x.value() * w.value().transpose(), {x, w}, [x, w](Tape& tp, const Mat& g, const Mat&) {
    if (tp.tracks(x)) tp.accumulate(x, g * w.value());
    if (tp.tracks(w)) tp.accumulate(w, g.transpose() * x.value());
  });
}

Var add_row(const Var& x, const Var& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) throw DimensionMismatch("add_row: bad row shape");
  Tape& t = *x.tape();
  Mat v = x.value();
  v.rowwise() += row.value().row(0);
  return t.record(std::move(v), {x, row}, [x, row](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, g);
    if (tp.tracks(row)) tp.accumulate(row, g.colwise().sum());
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  if (x.cols() != w.cols()) throw DimensionMismatch("affine: input width does not match weights");
  if (b.rows() != 1 || b.cols() != w.rows()) throw DimensionMismatch("affine: bad bias shape");
  Tape& t = *x.tape();
  Mat v = x.value() * w.value().transpose();
  v.rowwise() += b.value().row(0);
  return t.record(std::move(v), {x, w, b}, [x, w, b](Tape& tp, const Mat& g, const Mat&) {
    if (tp.tracks(x)) tp.accumulate(x, g * w.value());
    if (tp.tracks(w)) tp.accumulate(w, g.transpose() * x.value());
    if (tp.tracks(b)) tp.accumulate(b, g.colwise().sum());
  });
}

Var operator+(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(a, g);
    if (tp.tracks(b)) tp.accumulate(b, -g);
  });
}

Var operator*(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& tp, const Mat& g, const Mat&) {
                            if (tp.tracks(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
                            if (tp.tracks(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
                          });
}

Var operator/(const Var& a, const Var& b) {
  same_shape(a, b, "div");
  return a.tape()->record(a.value().cwiseQuotient(b.value()), {a, b},
                          [a, b](Tape& tp, const Mat& g, const Mat&) {
                            if (tp.tracks(a)) tp.accumulate(a, g.cwiseQuotient(b.value()));
                            if (tp.tracks(b)) {
                              const Mat q = a.value().cwiseQuotient(b.value().cwiseProduct(b.value()));
                              tp.accumulate(b, -g.cwiseProduct(q));
                            }
                          });
}

Var operator-(const Var& a) { return a * -1.0; }

Var operator+(const Var& a, double c) {
  Mat v = a.value().array() + c;
  return a.tape()->record(std::move(v), {a}, [a](Tape& tp, const Mat& g, const Mat&) { tp.accumulate(a, g); });
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) { return (a * -1.0) + c; }

Var operator*(const Var& a, double c) {
  return a.tape()->record(a.value() * c, {a}, [a, c](Tape& tp, const Mat& g, const Mat&) { tp.accumulate(a, g * c); });
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) { return a * (1.0 / c); }

Var tanh(const Var& x) {
  return x.tape()->record(detail::fast_tanh(x.value()), {x},
                          [x](Tape& tp, const Mat& g, const Mat& y) {
                            tp.accumulate(x, (g.array() * (1.0 - y.array().square())).matrix());
                          });
}

Var sin(const Var& x) {
  return x.tape()->record(x.value().array().sin().matrix(), {x}, [x](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, g.cwiseProduct(x.value().array().cos().matrix()));
  });
}

Var cos(const Var& x) {
  return x.tape()->record(x.value().array().cos().matrix(), {x}, [x](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, -g.cwiseProduct(x.value().array().sin().matrix()));
  });
}

Var square(const Var& x) {
  return x.tape()->record(x.value().array().square().matrix(), {x}, [x](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, 2.0 * g.cwiseProduct(x.value()));
  });
}

Var tanh_tangent(const Var& a, const Var& adot) {
  same_shape(a, adot, "tanh_tangent");
  Mat v = (1.0 - a.value().array().square()) * adot.value().array();
  return a.tape()->record(std::move(v), {a, adot}, [a, adot](Tape& tp, const Mat& g, const Mat&) {
    if (tp.tracks(a)) {
      tp.accumulate(a, (-2.0 * a.value().array() * adot.value().array() * g.array()).matrix());
    }
    if (tp.tracks(adot)) {
      tp.accumulate(adot, ((1.0 - a.value().array().square()) * g.array()).matrix());
    }
  });
}

Var scale_cols(const Var& x, const Eigen::RowVectorXd& s) {
  if (s.size() != x.cols()) throw DimensionMismatch("scale_cols: scale width mismatch");
  Mat v = x.value().array().rowwise() * s.array();
  return x.tape()->record(std::move(v), {x}, [x, s](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, (g.array().rowwise() * s.array()).matrix());
  });
}

Var shift_cols(const Var& x, const Eigen::RowVectorXd& s) {
  if (s.size() != x.cols()) throw DimensionMismatch("shift_cols: shift width mismatch");
  Mat v = x.value();
  v.rowwise() += s;
  return x.tape()->record(std::move(v), {x}, [x](Tape& tp, const Mat& g, const Mat&) { tp.accumulate(x, g); });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
  const Mat& xv = x.value();
  Mat v(static_cast<Eigen::Index>(idx.size()), xv.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= xv.rows()) throw DimensionMismatch("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = xv.row(idx[i]);
  }
  return x.tape()->record(std::move(v), {x}, [x, idx](Tape& tp, const Mat& g, const Mat&) {
    Mat acc = Mat::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(x, acc);
  });
}

Var block_sum(const Var& x, Eigen::Index blocks) {
  if (blocks <= 0 || x.cols() % blocks != 0) {
    throw DimensionMismatch("block_sum: width " + std::to_string(x.cols()) +
                            " is not divisible into " + std::to_string(blocks) + " blocks");
  }
  const Eigen::Index w = x.cols() / blocks;
  Mat v(x.rows(), blocks);
  for (Eigen::Index b = 0; b < blocks; ++b) v.col(b) = x.value().middleCols(b * w, w).rowwise().sum();
  return x.tape()->record(std::move(v), {x}, [x, blocks, w](Tape& tp, const Mat& g, const Mat&) {
    Mat acc(x.rows(), x.cols());
    for (Eigen::Index b = 0; b < blocks; ++b) acc.middleCols(b * w, w).colwise() = g.col(b);
    tp.accumulate(x, acc);
  });
}

Var col(const Var& x, Eigen::Index j) { return cols(x, j, 1); }

Var cols(const Var& x, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > x.cols()) throw DimensionMismatch("cols: out of range");
  return x.tape()->record(x.value().middleCols(first, count), {x},
                          [x, first, count](Tape& tp, const Mat& g, const Mat&) {
                            Mat acc = Mat::Zero(x.rows(), x.cols());
                            acc.middleCols(first, count) = g;
                            tp.accumulate(x, acc);
                          });
}

Var hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionMismatch("hstack: no parts");
  Tape& t = *parts.front().tape();
  Eigen::Index width = 0;
  for (const Var& p : parts) {
    t.check_owner(p);
    if (p.rows() != parts.front().rows()) throw DimensionMismatch("hstack: row counts differ");
    width += p.cols();
  }
  Mat v(parts.front().rows(), width);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(v), parts, [parts](Tape& tp, const Mat& g, const Mat&) {
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      tp.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var sum(const Var& x) {
  Mat v(1, 1);
  v(0, 0) = x.value().sum();
  return x.tape()->record(std::move(v), {x}, [x](Tape& tp, const Mat& g, const Mat&) {
    tp.accumulate(x, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var& x) {
  const auto n = static_cast<double>(x.value().size());
  return sum(x) / n;
}

}  // namespace pidon::ad
