#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convdysat/tape.hpp"

namespace convdysat {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;   // empty for the single-tensor overload
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;  // number of perturbed coordinates
};

/// Compares reverse-mode gradients against central differences.
///
/// The error of one coordinate is |analytic - (f(x+e) - f(x-e)) / 2e| / max(1, |analytic|);
/// the maximum over coordinates is reported. Non-finite coordinates (for instance -inf
/// mask entries) are never perturbed.
GradCheckResult finite_difference_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
                                        double epsilon = 1e-5);

// Multi-tensor form: `f` binds the given tensors to the tape itself (as leaves) and
// returns a scalar. The tensors are perturbed in place and restored afterwards.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};
GradCheckResult finite_difference_check(const std::function<Var(Tape&)>& f, std::span<const NamedTensor> inputs,
                                        double epsilon = 1e-5);

}  // namespace convdysat

namespace convdysat {

struct ComponentCheck {
  std::string component;
  GradCheckResult result;
  double threshold;

  bool passed() const { return result.max_rel_error < threshold; }
};

/// Finite-difference checks of every layer and of the composed model loss on a
/// 4-node, 3-step graph. Each layer output is reduced against a fixed random weighting,
/// so the whole Jacobian is exercised.
std::vector<ComponentCheck> run_gradcheck_suite(std::uint64_t seed = 7, double layer_threshold = 1e-6,
                                                double composed_threshold = 1e-4);

}  // namespace convdysat
