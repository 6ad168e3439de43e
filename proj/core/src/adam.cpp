#include "convdysat/adam.hpp"

#include <cmath>

#include "convdysat/error.hpp"
#include "convdysat/model.hpp"

namespace convdysat {

void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg) {
  for (const auto& [name, p] : params) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter '" + name + "'");
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.size() != p.size()) m.assign(p.size(), 0.0);
    if (v.size() != p.size()) v.assign(p.size(), 0.0);
    const auto grad = p.grad();
    const double decay = is_decayed_parameter(name) ? cfg.learning_rate * cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      p[i] -= decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double grad_norm(const ParameterSet& params) {
  double total = 0.0;
  for (const auto& [name, p] : params)
    for (double g : p.grad()) total += g * g;
  return std::sqrt(total);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, p] : params) p.scale_grad(factor);
  }
  return norm;
}

}  // namespace convdysat
