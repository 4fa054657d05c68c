#include "entichart/tape.hpp"

#include "entichart/error.hpp"

namespace entichart::ad {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id_);
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw ContractError("tape: input belongs to a different tape");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw ContractError("tape: input belongs to a different tape");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

void Tape::accumulate(Var target, const Matrix& g) {
  Node& n = nodes_[target.id_];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw ShapeError("tape: gradient shape " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                     " does not match value " + std::to_string(n.value.rows()) + "x" +
                     std::to_string(n.value.cols()));
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
  Node& root = nodes_[loss.id_];
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw ContractError("backward: loss must be a scalar, got " + std::to_string(root.value.rows()) + "x" +
                        std::to_string(root.value.cols()));
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  root.has_grad = true;

  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad, n.value);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace entichart::ad
