#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass. Values are row-major in
// spirit: a batch of representations is a matrix with one row per item.
// backward() seeds a 1x1 node with 1 and accumulates into Parameter::grad for
// every parameter leaf that was recorded.

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace foal::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class ParamGroup { Encoder, Classifier, Discriminator };

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Classifier;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, ParamGroup g, Matrix v)
      : name(std::move(n)), group(g), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Var constant(Matrix m);
  Var param(Parameter& p);

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  /// Gradient of the last backward() root w.r.t. node `v`; zeros if untouched.
  Matrix grad(Var v) const;

  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  int push(Matrix value, std::vector<int> inputs, Backward bw);
  Matrix& grad_ref(int id);
  const Matrix& out_grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> inputs;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x c row to every row of `a`.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var tanh(Var a);
Var relu(Var a);
Var transpose(Var a);
/// Selects rows by index; index -1 yields a zero row.
Var gather_rows(Var a, const std::vector<int>& rows);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var log_softmax_rows(Var a);
/// Divides each row by its L2 norm. Throws DegenerateInput on a zero row.
Var normalize_rows(Var a);
/// Scalar sum_i a(i, cols[i]).
Var pick_sum(Var a, const std::vector<int>& cols);
/// Scalar sum of w .* a.
Var weighted_sum(Var a, const Matrix& w);
Var sum(Var a);
/// Identity forward; backward multiplies the incoming gradient by -s.
Var gradient_reversal(Var a, double s);

enum class Activation { Tanh, Relu };
Var activate(Var a, Activation act);
Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

}  // namespace foal::ad
