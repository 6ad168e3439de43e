#include "convdysat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "convdysat/error.hpp"

namespace convdysat {
namespace {

double evaluate(const std::function<Var(Tape&)>& f) {
  Tape tape;
  return f(tape).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const std::function<Var(Tape&)>& f, std::span<const NamedTensor> inputs,
                                        double epsilon) {
  std::vector<bool> previous_flag;
  for (const auto& in : inputs) {
    previous_flag.push_back(in.tensor->requires_grad());
    in.tensor->set_requires_grad(true);
    in.tensor->clear_grad();
  }
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = *inputs[k].tensor;
    std::vector<double> analytic(x.size(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double original = x[i];
      if (!std::isfinite(original)) continue;
      x[i] = original + epsilon;
      const double up = evaluate(f);
      x[i] = original - epsilon;
      const double down = evaluate(f);
      x[i] = original;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      ++result.coordinates;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        result.worst_tensor = inputs[k].name;
        result.worst_index = i;
      }
    }
    x.clear_grad();
    x.set_requires_grad(previous_flag[k]);
  }
  return result;
}

GradCheckResult finite_difference_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
                                        double epsilon) {
  Tensor work = x;
  auto bound = [&](Tape& tape) { return f(tape, tape.leaf(work)); };
  const NamedTensor input{"", &work};
  return finite_difference_check(bound, std::span<const NamedTensor>(&input, 1), epsilon);
}

}  // namespace convdysat
