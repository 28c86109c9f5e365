#include "driveid/numerics/tape.hpp"

#include <algorithm>

#include "driveid/error.hpp"

namespace driveid::numerics {

const Tensor& Var::value() const { return tape_->nodes_.at(id_).value(); }

const Tensor& Var::grad() const { return tape_->nodes_.at(id_).grad; }

bool Var::requires_grad() const { return tape_->nodes_.at(id_).requires_grad; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::parameter(const Tensor& value) {
  Node node;
  node.borrowed = &value;
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::borrow(const Tensor& value) {
  Node node;
  node.borrowed = &value;
  return push(std::move(node));
}

Var Tape::record(Tensor output, std::initializer_list<Var> inputs, GradientRule rule) {
  return record(std::move(output), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(rule));
}

Var Tape::record(Tensor output, std::span<const Var> inputs, GradientRule rule) {
  bool needs_grad = false;
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape_ != this) {
      throw ContractError("operation mixes tensors from different tapes");
    }
    needs_grad = needs_grad || nodes_[in.id_].requires_grad;
    ids.push_back(in.id_);
  }
  Node node;
  node.owned = std::move(output);
  node.requires_grad = needs_grad;
  Var out = push(std::move(node));
  if (needs_grad) {
    ops_.push_back(Op{std::move(ids), out.id_, std::move(rule)});
  }
  return out;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) {
    throw ContractError("backward() called with a loss recorded on another tape");
  }
  const Node& root = nodes_[loss.id_];
  if (root.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        to_string(root.value().shape()));
  }
  for (Node& node : nodes_) {
    if (node.requires_grad) {
      node.grad = Tensor(node.value().shape());
    } else {
      node.grad = Tensor();
    }
  }
  if (!root.requires_grad) {
    return;
  }
  nodes_[loss.id_].grad[0] = 1.0;

  std::vector<Tensor*> slots;
  for (auto op = ops_.rbegin(); op != ops_.rend(); ++op) {
    // Ops recorded after the loss cannot influence it.
    if (op->output > loss.id_) continue;
    const Node& out = nodes_[op->output];
    slots.clear();
    for (std::size_t id : op->inputs) {
      Node& in = nodes_[id];
      slots.push_back(in.requires_grad ? &in.grad : nullptr);
    }
    op->rule(Backprop{out.value(), out.grad, slots});
  }
}

}  // namespace driveid::numerics
