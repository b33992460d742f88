#include "foal/autodiff.hpp"

#include <cmath>

namespace foal::ad {

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::logic_error("Var::scalar on non-scalar node");
  }
  return v(0, 0);
}

int Tape::push(Matrix value, std::vector<int> inputs, Backward bw) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Matrix m) { return Var{this, push(std::move(m), {}, nullptr)}; }

Var Tape::param(Parameter& p) {
  int id = push(p.value, {}, nullptr);
  nodes_[id].param = &p;
  return Var{this, id};
}

Matrix& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward: foreign node");
  if (nodes_[root.id].value.size() != 1) throw std::logic_error("backward: root must be scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_ref(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::logic_error("operands on different tapes");
  return *a.tape;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  int ia = a.id, ib = b.id;
  int id = t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    tp.grad_ref(ia).noalias() += g * tp.value(ib).transpose();
    tp.grad_ref(ib).noalias() += tp.value(ia).transpose() * g;
  });
  return Var{&t, id};
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  int ia = a.id, ib = b.id;
  int id = t.push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    tp.grad_ref(ia) += tp.out_grad(self);
    tp.grad_ref(ib) += tp.out_grad(self);
  });
  return Var{&t, id};
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  int ia = a.id, ib = b.id;
  int id = t.push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    tp.grad_ref(ia) += tp.out_grad(self);
    tp.grad_ref(ib) -= tp.out_grad(self);
  });
  return Var{&t, id};
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad bias shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  int ia = a.id, ir = row.id;
  int id = t.push(std::move(out), {ia, ir}, [ia, ir](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    tp.grad_ref(ia) += g;
    tp.grad_ref(ir) += g.colwise().sum();
  });
  return Var{&t, id};
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  int ia = a.id;
  int id = t.push(a.value() * s, {ia}, [ia, s](Tape& tp, int self) {
    tp.grad_ref(ia) += tp.out_grad(self) * s;
  });
  return Var{&t, id};
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().tanh().matrix();
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Matrix& y = tp.value(self);
    tp.grad_ref(ia).array() += tp.out_grad(self).array() * (1.0 - y.array().square());
  });
  return Var{&t, id};
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().cwiseMax(0.0);
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Matrix& x = tp.value(ia);
    tp.grad_ref(ia).array() += (x.array() > 0.0).select(tp.out_grad(self).array(), 0.0);
  });
  return Var{&t, id};
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  int ia = a.id;
  int id = t.push(a.value().transpose(), {ia}, [ia](Tape& tp, int self) {
    tp.grad_ref(ia) += tp.out_grad(self).transpose();
  });
  return Var{&t, id};
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = *a.tape;
  const Matrix& src = a.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < -1 || rows[r] >= src.rows()) throw std::out_of_range("gather_rows: index out of range");
    if (rows[r] >= 0) out.row(static_cast<Eigen::Index>(r)) = src.row(rows[r]);
  }
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia, rows](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    Matrix& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= 0) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
  return Var{&t, id};
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = *parts.front().tape;
  Eigen::Index rows = parts.front().rows(), cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::logic_error("concat_cols: operands on different tapes");
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  int id = t.push(std::move(out), ids, [ids, widths](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    Eigen::Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      tp.grad_ref(ids[k]) += g.middleCols(o, widths[k]);
      o += widths[k];
    }
  });
  return Var{&t, id};
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = *parts.front().tape;
  Eigen::Index cols = parts.front().cols(), rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::logic_error("concat_rows: operands on different tapes");
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
    ids.push_back(p.id);
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  int id = t.push(std::move(out), ids, [ids, heights](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    Eigen::Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      tp.grad_ref(ids[k]) += g.middleRows(o, heights[k]);
      o += heights[k];
    }
  });
  return Var{&t, id};
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    const Matrix& y = tp.value(self);
    Matrix p = y.array().exp().matrix();
    Eigen::VectorXd gs = g.rowwise().sum();
    Matrix& ga = tp.grad_ref(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga.row(r) += g.row(r) - gs(r) * p.row(r);
  });
  return Var{&t, id};
}

Var normalize_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > 0.0)) throw DegenerateInput("cosine similarity undefined for a zero vector");
  }
  Matrix out = norms.asDiagonal().inverse() * x;
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia, norms](Tape& tp, int self) {
    const Matrix& g = tp.out_grad(self);
    const Matrix& y = tp.value(self);
    Matrix& ga = tp.grad_ref(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double dot = g.row(r).dot(y.row(r));
      ga.row(r) += (g.row(r) - dot * y.row(r)) / norms(r);
    }
  });
  return Var{&t, id};
}

Var pick_sum(Var a, const std::vector<int>& cols) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(cols.size()) != x.rows()) throw std::invalid_argument("pick_sum: label count mismatch");
  double s = 0.0;
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] < 0 || cols[r] >= x.cols()) throw std::out_of_range("pick_sum: class index out of range");
    s += x(static_cast<Eigen::Index>(r), cols[r]);
  }
  Matrix out(1, 1);
  out(0, 0) = s;
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia, cols](Tape& tp, int self) {
    double g = tp.out_grad(self)(0, 0);
    Matrix& ga = tp.grad_ref(ia);
    for (std::size_t r = 0; r < cols.size(); ++r) ga(static_cast<Eigen::Index>(r), cols[r]) += g;
  });
  return Var{&t, id};
}

Var weighted_sum(Var a, const Matrix& w) {
  Tape& t = *a.tape;
  check_same_shape(a.value(), w, "weighted_sum");
  Matrix out(1, 1);
  out(0, 0) = (a.value().array() * w.array()).sum();
  int ia = a.id;
  int id = t.push(std::move(out), {ia}, [ia, w](Tape& tp, int self) {
    tp.grad_ref(ia) += tp.out_grad(self)(0, 0) * w;
  });
  return Var{&t, id};
}

Var sum(Var a) {
  return weighted_sum(a, Matrix::Ones(a.rows(), a.cols()));
}

Var gradient_reversal(Var a, double s) {
  if (s < 0.0) throw std::invalid_argument("gradient_reversal: scale must be >= 0");
  Tape& t = *a.tape;
  int ia = a.id;
  int id = t.push(a.value(), {ia}, [ia, s](Tape& tp, int self) {
    tp.grad_ref(ia) -= s * tp.out_grad(self);
  });
  return Var{&t, id};
}

Var activate(Var a, Activation act) {
  return act == Activation::Tanh ? tanh(a) : relu(a);
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string activation_name(Activation act) { return act == Activation::Tanh ? "tanh" : "relu"; }

}  // namespace foal::ad
