#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convdysat/tensor.hpp"

namespace convdysat {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Records a forward computation for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so the node list is already a topological
/// order; `backward` walks it in reverse exactly once. Leaves bound with `leaf()` refer
/// to caller-owned tensors and receive their gradients in the tensor's grad slot.
class Tape {
 public:
  // Called with the gradient of the node's output. Pushes contributions into inputs
  // through `Tape::grad_buffer`.
  using BackwardRule = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Binds a caller-owned tensor. The tensor must outlive the tape's backward pass.
  Var leaf(Tensor& tensor);
  // A value that never receives a gradient.
  Var constant(Tensor value);
  // Appends an operation result. `rule` may be empty when no input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, std::string op, BackwardRule rule);

  // Accumulates d(loss)/d(leaf) into every bound leaf with requires_grad. A second
  // call without `reset_backward()` throws.
  void backward(const Var& loss);
  // Drops intermediate gradients so backward may run again. Leaf grad slots are
  // caller-owned and are not touched.
  void reset_backward();

  bool needs_grad(std::size_t index) const { return nodes_.at(index).needs_grad; }
  const Tensor& value(std::size_t index) const { return nodes_.at(index).value; }
  const std::string& op_name(std::size_t index) const { return nodes_.at(index).op; }
  std::size_t size() const { return nodes_.size(); }

  // Mutable gradient accumulator of a node, zero-initialised on first use. Returns an
  // empty span for nodes that do not need a gradient.
  std::span<double> grad_buffer(std::size_t index);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    std::string op;
    BackwardRule rule;
    Tensor* leaf = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace convdysat
