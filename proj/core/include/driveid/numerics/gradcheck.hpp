#pragma once

#include <functional>
#include <span>
#include <vector>

#include "driveid/numerics/tape.hpp"

namespace driveid::numerics {

/// Builds a scalar graph on `tape` from the given parameter handles.
using ScalarGraph = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares tape gradients with central differences over every element of
/// every parameter. The relative error of one element is
/// |analytic - numeric| / max(1, |numeric|).
///
/// `params` is perturbed in place during the check and restored afterwards.
GradientCheck finite_difference_check(const ScalarGraph& graph, std::vector<Tensor>& params,
                                      double step);

}  // namespace driveid::numerics
