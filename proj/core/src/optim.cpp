#include "celt/optim.hpp"

#include <algorithm>
#include <cmath>

namespace celt {

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].defined() || !params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) +
                          " has no gradient");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), T(0));
      state.second_moment.emplace_back(p.numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " +
                         std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != p.numel()) {
      throw DimensionError("adam_step: moment size mismatch for parameter " +
                           std::to_string(i));
    }
    auto data = p.mutable_data();
    auto grad = p.mutable_grad();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[j]) / correction1;
      const double v_hat = static_cast<double>(v[j]) / correction2;
      data[j] -= static_cast<T>(state.learning_rate * m_hat /
                                (std::sqrt(v_hat) + state.epsilon));
    }
    std::fill(grad.begin(), grad.end(), T(0));
  }
}

template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Tensor<double>>&,
                                AdamState<double>&);

}  // namespace celt
