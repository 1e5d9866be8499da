#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fsner/graph.hpp"
#include "fsner/tensor.hpp"

namespace fsner {

// Adam state: first/second moments per parameter (keyed by name) plus the
// shared step count. A fresh state is created for each training or
// finetuning run.
struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, std::pair<Tensor, Tensor>> moments;
};

// One Adam update over parallel lists of parameters and gradients.
// Throws TrainError on a non-finite gradient.
void adam_step(const std::vector<Parameter*>& params,
               const std::vector<Tensor>& grads, AdamState& state, double lr);

}  // namespace fsner
