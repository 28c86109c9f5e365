#include "driveid/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "driveid/error.hpp"

namespace driveid::numerics {

namespace {

double evaluate(const ScalarGraph& graph, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant(p));
  return graph(tape, vars).value().item();
}

}  // namespace

GradientCheck finite_difference_check(const ScalarGraph& graph, std::vector<Tensor>& params,
                                      double step) {
  if (!(step > 0.0)) throw ParameterError("finite_difference_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& p : params) vars.push_back(tape.leaf(p));
    Var loss = graph(tape, vars);
    tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  GradientCheck result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double original = params[p][i];
      params[p][i] = original + step;
      const double up = evaluate(graph, params);
      params[p][i] = original - step;
      const double down = evaluate(graph, params);
      params[p][i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace driveid::numerics
