#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "driveid/numerics/tensor.hpp"

namespace driveid::numerics {

class Tape;

/// Handle to a tensor recorded on a Tape.
///
/// Cheap to copy; valid for the lifetime of its tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient populated by Tape::backward; empty before that.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Arguments handed to a gradient rule during the backward sweep.
struct Backprop {
  const Tensor& output;
  const Tensor& output_grad;
  /// One slot per recorded input; null when that input needs no gradient.
  std::span<Tensor* const> input_grads;
};

/// Reverse-mode differentiation tape.
///
/// Operations are appended in execution order; backward() replays them once
/// in reverse. References handed out by Var::value() stay valid while the
/// tape grows.
class Tape {
 public:
  using GradientRule = std::function<void(const Backprop&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Owned input that receives a gradient.
  Var leaf(Tensor value);
  /// Borrowed input that receives a gradient. `value` must outlive the tape
  /// and stay unmodified while the tape is in use.
  Var parameter(const Tensor& value);
  /// Borrowed input that never receives a gradient; same lifetime rule.
  Var borrow(const Tensor& value);

  /// Appends an operation. The rule is kept only if some input needs a
  /// gradient.
  Var record(Tensor output, std::initializer_list<Var> inputs, GradientRule rule);
  Var record(Tensor output, std::span<const Var> inputs, GradientRule rule);

  /// Populates grad() of every node that requires one, seeded with
  /// d loss / d loss = 1. Throws ContractError for a non-scalar loss or one
  /// recorded on another tape.
  void backward(Var loss);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t op_count() const noexcept { return ops_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool requires_grad = false;

    const Tensor& value() const { return borrowed != nullptr ? *borrowed : owned; }
  };

  struct Op {
    std::vector<std::size_t> inputs;
    std::size_t output;
    GradientRule rule;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<Op> ops_;
};

}  // namespace driveid::numerics
