#pragma once

#include <cstdint>
#include <vector>

#include "celt/tensor.hpp"

namespace celt {

/// Bias-corrected Adam. Moments are indexed in the same order as the
/// parameter list passed to adam_step, so that order must stay fixed.
template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

/// Applies one update to every parameter and clears their gradients.
/// Throws ContractError for a parameter without a gradient buffer, and
/// DimensionError if the moments no longer mirror the parameter shapes.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state);

}  // namespace celt
