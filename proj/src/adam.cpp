#include "fsner/adam.hpp"

#include <cmath>

#include "fsner/error.hpp"

namespace fsner {

void adam_step(const std::vector<Parameter*>& params,
               const std::vector<Tensor>& grads, AdamState& state, double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " parameters vs " + std::to_string(grads.size()) +
                         " gradients");
  }
  if (!(lr > 0.0)) {
    throw DomainError("adam_step: learning rate must be positive");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!all_finite(grads[i])) {
      throw TrainError("adam_step: non-finite gradient for parameter '" +
                       params[i]->name + "'");
    }
    if (!params[i]->value.same_shape(grads[i])) {
      throw DimensionError("adam_step: gradient shape " + shape_str(grads[i]) +
                           " does not match parameter '" + params[i]->name +
                           "' " + shape_str(params[i]->value));
    }
  }

  state.step += 1;
  double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const Tensor& g = grads[i];
    auto it = state.moments.find(p.name);
    if (it == state.moments.end()) {
      it = state.moments
               .emplace(p.name, std::make_pair(Tensor(p.value.shape()),
                                               Tensor(p.value.shape())))
               .first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      double mhat = m[j] / b1t;
      double vhat = v[j] / b2t;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace fsner
