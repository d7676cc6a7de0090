#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "celt/model.hpp"
#include "celt/tensor.hpp"

namespace celt {

struct GradCheckEntry {
  std::string name;
  std::size_t entries = 0;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||), or 0 when
  /// both norms fall below the absolute floor.
  double relative_error = 0.0;
  double analytic_norm = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  double worst_relative_error() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Gradients with both norms below this count as matching zeros.
  double zero_floor = 1e-10;
};

/// Central finite differences of `loss_fn` with respect to every entry of
/// each input, compared with the gradients from one backward pass. The
/// loss function must rebuild its graph on each call and be
/// deterministic.
GradCheckReport check_gradients(const std::function<Tensor64()>& loss_fn,
                                const std::vector<NamedTensor<double>>& inputs,
                                const GradCheckOptions& options = {});

/// One check per differentiable tensor op, each on small random inputs.
GradCheckReport check_tensor_ops(std::uint64_t seed, const GradCheckOptions& options = {});

/// Joint loss of a 2-layer, H=8 model on a padded dialogue input, with
/// respect to every parameter the loss touches.
GradCheckReport check_model_gradients(std::uint64_t seed, bool use_crf,
                                      const GradCheckOptions& options = {});

/// MLM + NSP pretraining loss of the same tiny model.
GradCheckReport check_pretrain_gradients(std::uint64_t seed,
                                         const GradCheckOptions& options = {});

}  // namespace celt
