#include "celt/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace celt {

namespace {

template <typename T>
T log_sum_exp(const T* v, std::size_t n) {
  T mx = *std::max_element(v, v + n);
  if (!std::isfinite(mx)) return mx;
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(v[i] - mx);
  return mx + std::log(total);
}

template <typename T>
void check_shapes(std::size_t emission_size, std::size_t num_tags,
                  const CrfParams<T>& crf) {
  if (num_tags == 0 || emission_size % num_tags != 0) {
    throw DimensionError("crf: emissions of size " + std::to_string(emission_size) +
                         " do not form rows of " + std::to_string(num_tags) + " tags");
  }
  if (crf.transitions.numel() != num_tags * num_tags || crf.start.numel() != num_tags ||
      crf.end.numel() != num_tags) {
    throw DimensionError("crf: parameter shapes do not match " +
                         std::to_string(num_tags) + " tags");
  }
}

// alpha[t][j] = log sum over paths ending in j at t.
template <typename T>
std::vector<T> forward_scores(std::span<const T> em, std::size_t steps,
                              std::size_t L, const CrfParams<T>& crf) {
  const auto trans = crf.transitions.data();
  const auto start = crf.start.data();
  std::vector<T> alpha(steps * L);
  for (std::size_t j = 0; j < L; ++j) alpha[j] = start[j] + em[j];
  std::vector<T> scratch(L);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i)
        scratch[i] = alpha[(t - 1) * L + i] + trans[i * L + j];
      alpha[t * L + j] = log_sum_exp(scratch.data(), L) + em[t * L + j];
    }
  }
  return alpha;
}

// beta[t][i] = log sum over continuations from i at t, including end scores.
template <typename T>
std::vector<T> backward_scores(std::span<const T> em, std::size_t steps,
                               std::size_t L, const CrfParams<T>& crf) {
  const auto trans = crf.transitions.data();
  const auto end = crf.end.data();
  std::vector<T> beta(steps * L);
  for (std::size_t i = 0; i < L; ++i) beta[(steps - 1) * L + i] = end[i];
  std::vector<T> scratch(L);
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j)
        scratch[j] = trans[i * L + j] + em[(t + 1) * L + j] + beta[(t + 1) * L + j];
      beta[t * L + i] = log_sum_exp(scratch.data(), L);
    }
  }
  return beta;
}

}  // namespace

template <typename T>
T crf_path_score(std::span<const T> emissions, std::size_t num_tags,
                 std::span<const std::int32_t> tags, const CrfParams<T>& crf) {
  check_shapes(emissions.size(), num_tags, crf);
  const std::size_t steps = emissions.size() / num_tags;
  if (tags.size() != steps) {
    throw DimensionError("crf: " + std::to_string(tags.size()) + " tags for " +
                         std::to_string(steps) + " positions");
  }
  if (steps == 0) return T(0);
  for (auto tag : tags) {
    if (tag < 0 || static_cast<std::size_t>(tag) >= num_tags) {
      throw IndexError("crf: tag " + std::to_string(tag) + " out of range");
    }
  }
  const auto trans = crf.transitions.data();
  T score = crf.start.data()[tags[0]] + crf.end.data()[tags[steps - 1]];
  for (std::size_t t = 0; t < steps; ++t) {
    score += emissions[t * num_tags + tags[t]];
    if (t > 0) score += trans[tags[t - 1] * num_tags + tags[t]];
  }
  return score;
}

template <typename T>
T crf_log_partition(std::span<const T> emissions, std::size_t num_tags,
                    const CrfParams<T>& crf) {
  check_shapes(emissions.size(), num_tags, crf);
  const std::size_t steps = emissions.size() / num_tags;
  if (steps == 0) return T(0);
  auto alpha = forward_scores(emissions, steps, num_tags, crf);
  std::vector<T> last(num_tags);
  for (std::size_t j = 0; j < num_tags; ++j)
    last[j] = alpha[(steps - 1) * num_tags + j] + crf.end.data()[j];
  return log_sum_exp(last.data(), num_tags);
}

template <typename T>
Tensor<T> crf_negative_log_likelihood(const Tensor<T>& emissions,
                                      std::span<const std::int32_t> tags,
                                      const CrfParams<T>& crf) {
  if (emissions.dim() != 2) {
    throw DimensionError("crf: emissions must be [T x L], got " +
                         shape_str(emissions.shape()));
  }
  const std::size_t L = emissions.cols();
  const std::size_t steps = emissions.rows();
  const T gold = crf_path_score(emissions.data(), L, tags, crf);
  const T log_z = crf_log_partition(emissions.data(), L, crf);
  std::vector<std::int32_t> gold_tags(tags.begin(), tags.end());

  auto en = emissions.node_ptr();
  auto tn = crf.transitions.node_ptr();
  auto sn = crf.start.node_ptr();
  auto endn = crf.end.node_ptr();
  CrfParams<T> params = crf;
  return Tensor<T>::make_result(
      {1}, {log_z - gold}, {emissions, crf.transitions, crf.start, crf.end},
      [en, tn, sn, endn, params, steps, L, log_z,
       gold_tags = std::move(gold_tags)](TensorNode<T>& self) {
        if (steps == 0) return;
        const T g = self.grad[0];
        std::span<const T> em(en->data);
        auto alpha = forward_scores(em, steps, L, params);
        auto beta = backward_scores(em, steps, L, params);
        // Unary marginals.
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t j = 0; j < L; ++j) {
            const T p = std::exp(alpha[t * L + j] + beta[t * L + j] - log_z);
            if (en->requires_grad) en->grad[t * L + j] += g * p;
            if (t == 0 && sn->requires_grad) sn->grad[j] += g * p;
            if (t + 1 == steps && endn->requires_grad) endn->grad[j] += g * p;
          }
        }
        // Pairwise marginals.
        if (tn->requires_grad) {
          for (std::size_t t = 1; t < steps; ++t) {
            for (std::size_t i = 0; i < L; ++i) {
              for (std::size_t j = 0; j < L; ++j) {
                const T lp = alpha[(t - 1) * L + i] + tn->data[i * L + j] +
                             em[t * L + j] + beta[t * L + j] - log_z;
                tn->grad[i * L + j] += g * std::exp(lp);
              }
            }
          }
        }
        // Subtract the gold path's indicator counts.
        for (std::size_t t = 0; t < steps; ++t) {
          const auto y = static_cast<std::size_t>(gold_tags[t]);
          if (en->requires_grad) en->grad[t * L + y] -= g;
          if (t > 0 && tn->requires_grad) {
            tn->grad[static_cast<std::size_t>(gold_tags[t - 1]) * L + y] -= g;
          }
        }
        if (sn->requires_grad) sn->grad[static_cast<std::size_t>(gold_tags[0])] -= g;
        if (endn->requires_grad)
          endn->grad[static_cast<std::size_t>(gold_tags[steps - 1])] -= g;
      });
}

template <typename T>
std::vector<std::int32_t> crf_decode(std::span<const T> emissions,
                                     std::size_t num_tags,
                                     const CrfParams<T>& crf) {
  check_shapes(emissions.size(), num_tags, crf);
  const std::size_t L = num_tags;
  const std::size_t steps = emissions.size() / L;
  if (steps == 0) return {};
  const auto trans = crf.transitions.data();
  std::vector<T> score(L), next(L);
  std::vector<std::int32_t> back((steps - 1) * L);
  for (std::size_t j = 0; j < L; ++j) score[j] = crf.start.data()[j] + emissions[j];
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t best_i = 0;
      T best = score[0] + trans[j];
      for (std::size_t i = 1; i < L; ++i) {
        const T s = score[i] + trans[i * L + j];
        if (s > best) {  // strict: ties keep the lower id
          best = s;
          best_i = i;
        }
      }
      next[j] = best + emissions[t * L + j];
      back[(t - 1) * L + j] = static_cast<std::int32_t>(best_i);
    }
    std::swap(score, next);
  }
  std::size_t best_last = 0;
  T best = score[0] + crf.end.data()[0];
  for (std::size_t j = 1; j < L; ++j) {
    const T s = score[j] + crf.end.data()[j];
    if (s > best) {
      best = s;
      best_last = j;
    }
  }
  std::vector<std::int32_t> path(steps);
  path[steps - 1] = static_cast<std::int32_t>(best_last);
  for (std::size_t t = steps - 1; t > 0; --t) {
    path[t - 1] = back[(t - 1) * L + static_cast<std::size_t>(path[t])];
  }
  return path;
}

#define CELT_INSTANTIATE(T)                                                         \
  template T crf_path_score<T>(std::span<const T>, std::size_t,                     \
                               std::span<const std::int32_t>, const CrfParams<T>&); \
  template T crf_log_partition<T>(std::span<const T>, std::size_t,                  \
                                  const CrfParams<T>&);                             \
  template Tensor<T> crf_negative_log_likelihood<T>(                                \
      const Tensor<T>&, std::span<const std::int32_t>, const CrfParams<T>&);        \
  template std::vector<std::int32_t> crf_decode<T>(std::span<const T>, std::size_t, \
                                                   const CrfParams<T>&);

CELT_INSTANTIATE(float)
CELT_INSTANTIATE(double)

#undef CELT_INSTANTIATE

}  // namespace celt
