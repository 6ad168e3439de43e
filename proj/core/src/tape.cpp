#include "convdysat/tape.hpp"

#include "convdysat/error.hpp"

namespace convdysat {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(index_);
}

Var Tape::leaf(Tensor& tensor) {
  Node node;
  node.value = tensor;
  node.op = "leaf";
  node.leaf = &tensor;
  node.needs_grad = tensor.requires_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, std::string op, BackwardRule rule) {
  Node node;
  node.value = std::move(value);
  node.op = std::move(op);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape() != this) throw Error(node.op + ": input recorded on a different tape");
    node.inputs.push_back(in.index());
    node.needs_grad = node.needs_grad || nodes_[in.index()].needs_grad;
  }
  if (node.needs_grad) node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t index) {
  auto& node = nodes_.at(index);
  if (!node.needs_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw Error("backward: loss was not produced by this tape");
  if (backward_done_) throw Error("backward: tape already differentiated; call reset_backward() first");
  if (loss.value().size() != 1) {
    throw DimensionError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.index()].needs_grad) return;

  grad_buffer(loss.index())[0] = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.leaf) {
      node.leaf->accumulate_grad(node.grad);
    } else if (node.rule) {
      // The rule may grow other nodes' buffers but never this node's, so the span stays valid.
      node.rule(*this, std::span<const double>(node.grad));
    }
  }
}

void Tape::reset_backward() {
  for (auto& node : nodes_) node.grad.clear();
  backward_done_ = false;
}

}  // namespace convdysat
