#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>

namespace entichart::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A trainable array with its accumulated gradient. Rank-3 tensors are stored
/// as c stacked d x d blocks, i.e. a (c*d) x d matrix.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records differentiable operations in execution order. backward() replays
/// them in reverse, which is a valid reverse topological order because every
/// node's inputs were recorded before it.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad, const Matrix& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose gradient can be read back with grad() after backward().
  Var variable(Matrix value);
  /// Leaf bound to a parameter; backward() adds into parameter.grad. Repeated
  /// calls with the same parameter return the same node.
  Var parameter(Parameter& p);

  /// Appends an op node. `fn` receives the gradient w.r.t. the node's value
  /// (plus the node's own value) and must call accumulate() on its inputs.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward fn);

  void accumulate(Var target, const Matrix& g);
  template <typename Derived>
  void accumulate_block(Var target, Eigen::Index r, Eigen::Index c, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[target.id_];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad.block(r, c, g.rows(), g.cols()) += g;
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node. The loss must be 1x1.
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  /// Gradient of the last backward() w.r.t. v; zeros if nothing flowed into it.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  void ensure_grad(Node& n) {
    if (!n.has_grad) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
  }
  Var push(Node node);

  // deque keeps references to values stable while new nodes are appended.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

inline double Var::scalar() const {
  const Matrix& m = value();
  return m(0, 0);
}

}  // namespace entichart::ad
