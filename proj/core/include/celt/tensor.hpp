#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "celt/error.hpp"
#include "celt/rng.hpp"

namespace celt {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty unless requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;
};

/// Row-major dense tensor with reverse-mode autodiff. Copies share the
/// underlying node; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data,
                     bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  /// Builds a graph node for a derived tensor. The node records parents
  /// and the backward closure only when gradient recording is enabled and
  /// some parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<T> data,
                            std::vector<Tensor> parents,
                            std::function<void(Node&)> backward_fn);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  T item() const;
  T at(std::size_t i, std::size_t j) const {
    return node_->data[i * cols() + j];
  }

  void zero_grad();
  /// Deep copy of the data with no graph history.
  Tensor clone(bool requires_grad = false) const;
  Tensor detach() const { return clone(false); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  template <typename U>
  Tensor<U> cast(bool requires_grad) const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return Tensor<U>::from(node_->shape, std::move(out), requires_grad);
  }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse-mode accumulation from a scalar loss into every reachable
/// tensor that requires a gradient. Gradients add to existing values.
template <typename T>
void backward(const Tensor<T>& loss);

// Elementwise and structural ops. All 2-D ops take [rows x cols] tensors.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a * b^T for a:[m x k], b:[n x k].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// x[i, :] + row for every i; row has shape [n] or [1 x n]. When
/// row_mask is nonempty, only rows with a nonzero mask receive the add.
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row,
                  std::span<const std::uint8_t> row_mask = {});

template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
/// Exact x * Phi(x) with the erf-based Gaussian CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Numerically stable softmax along `axis` of an N-d tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes over the last dimension.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T epsilon);

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table,
                           std::span<const std::int32_t> ids);
/// Same as embedding_lookup, for picking rows out of activations.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows);

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

/// Inverted dropout. Identity when training is false or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Sum over rows of -log softmax(logits[i])[targets[i]].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                std::span<const std::int32_t> targets);

/// Sum over all entries of the binary cross-entropy between
/// sigmoid(logits) and targets (same shape, values in [0, 1]).
template <typename T>
Tensor<T> sigmoid_cross_entropy(const Tensor<T>& logits,
                                std::span<const T> targets);

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace celt
