#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "celt/tensor.hpp"

namespace celt {

/// Linear-chain CRF over L tags: transitions[i][j] scores tag i followed
/// by tag j; start/end score the first and last tag.
template <typename T>
struct CrfParams {
  Tensor<T> transitions;  // [L x L]
  Tensor<T> start;        // [L]
  Tensor<T> end;          // [L]

  std::size_t num_tags() const { return start.numel(); }
};

/// Unnormalized score of one tag path. emissions is row-major [T x L].
template <typename T>
T crf_path_score(std::span<const T> emissions, std::size_t num_tags,
                 std::span<const std::int32_t> tags, const CrfParams<T>& crf);

/// log of the sum of exp(path score) over all paths (forward algorithm).
template <typename T>
T crf_log_partition(std::span<const T> emissions, std::size_t num_tags,
                    const CrfParams<T>& crf);

/// logZ - score(gold) as a differentiable scalar. The backward pass uses
/// forward-backward marginals.
template <typename T>
Tensor<T> crf_negative_log_likelihood(const Tensor<T>& emissions,
                                      std::span<const std::int32_t> tags,
                                      const CrfParams<T>& crf);

/// Viterbi decoding; ties go to the lower tag id.
template <typename T>
std::vector<std::int32_t> crf_decode(std::span<const T> emissions,
                                     std::size_t num_tags,
                                     const CrfParams<T>& crf);

}  // namespace celt
