#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "convdysat/params.hpp"

namespace convdysat {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;  // decoupled; only on tensors selected by is_decayed_parameter
};

struct AdamState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// One Adam update from the gradients stored in `params`.
///
/// Decoupled weight decay p <- p - lr * wd * p is applied first, then the bias-corrected
/// moment update. Throws DivergenceError naming the tensor if a gradient is not finite.
/// Tensors without a gradient slot are treated as having zero gradient.
void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg);

// Rescales all gradients so their global L2 norm is at most `max_norm`. Returns the norm
// before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

double grad_norm(const ParameterSet& params);

}  // namespace convdysat
