#include "celt/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace celt {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
ConstMatMap<T> as_mat(const std::vector<T>& v, std::size_t r, std::size_t c) {
  return ConstMatMap<T>(v.data(), static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c));
}

template <typename T>
MatMap<T> as_mut_mat(std::vector<T>& v, std::size_t r, std::size_t c) {
  return MatMap<T>(v.data(), static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(c));
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* op) {
  if (!t.defined() || t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-d tensor, got " +
                         (t.defined() ? shape_str(t.shape()) : "undefined"));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
T gaussian_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gaussian_pdf(T x) {
  return std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// --- Tensor ---------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data,
                          bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->data.size(), T(0));
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> data,
                                 std::vector<Tensor> parents,
                                 std::function<void(Node&)> backward_fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  Tensor out = from(std::move(shape), std::move(data), needs);
  if (needs) {
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  return node_->shape.empty() ? 1 : node_->shape.front();
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (node_->shape.size() < 2) return node_->shape.empty() ? 1 : node_->shape[0];
  return node_->shape.back();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  return from(node_->shape, node_->data, requires_grad);
}

// --- backward -------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : "[]"));
  }
  if (!loss.requires_grad()) return;

  using Node = TensorNode<T>;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// --- ops ------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  as_mut_mat(out, m, n).noalias() =
      as_mat(a.node()->data, m, k) * as_mat(b.node()->data, k, n);
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return Tensor<T>::make_result(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode<T>& self) {
        auto g = as_mat(self.grad, m, n);
        if (an->requires_grad) {
          as_mut_mat(an->grad, m, k).noalias() +=
              g * as_mat(bn->data, k, n).transpose();
        }
        if (bn->requires_grad) {
          as_mut_mat(bn->grad, k, n).noalias() +=
              as_mat(an->data, m, k).transpose() * g;
        }
      });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  }
  std::vector<T> out(m * n);
  as_mut_mat(out, m, n).noalias() =
      as_mat(a.node()->data, m, k) * as_mat(b.node()->data, n, k).transpose();
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return Tensor<T>::make_result(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode<T>& self) {
        auto g = as_mat(self.grad, m, n);
        if (an->requires_grad) {
          as_mut_mat(an->grad, m, k).noalias() += g * as_mat(bn->data, n, k);
        }
        if (bn->requires_grad) {
          as_mut_mat(bn->grad, n, k).noalias() +=
              g.transpose() * as_mat(an->data, m, k);
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const auto& ad = a.node()->data;
  const auto& bd = b.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                [an, bn](TensorNode<T>& self) {
                                  for (auto* p : {an.get(), bn.get()}) {
                                    if (!p->requires_grad) continue;
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      p->grad[i] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto& ad = a.node()->data;
  const auto& bd = b.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return Tensor<T>::make_result(
      a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<T>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (an->requires_grad) an->grad[i] += self.grad[i] * bn->data[i];
          if (bn->requires_grad) bn->grad[i] += self.grad[i] * an->data[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                [xn, factor](TensorNode<T>& self) {
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                    xn->grad[i] += factor * self.grad[i];
                                });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row,
                  std::span<const std::uint8_t> row_mask) {
  require_2d(x, "add_row");
  const std::size_t m = x.rows(), n = x.cols();
  if (row.numel() != n || row.dim() > 2 || (row.dim() == 2 && row.rows() != 1)) {
    throw DimensionError("add_row: row of shape " + shape_str(row.shape()) +
                         " does not broadcast over " + shape_str(x.shape()));
  }
  if (!row_mask.empty() && row_mask.size() != m) {
    throw DimensionError("add_row: mask length " +
                         std::to_string(row_mask.size()) + " != rows " +
                         std::to_string(m));
  }
  std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto& rd = row.node()->data;
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rd[j];
  }
  auto xn = x.node_ptr();
  auto rn = row.node_ptr();
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, row},
      [xn, rn, m, n, mask = std::move(mask)](TensorNode<T>& self) {
        if (xn->requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i];
        }
        if (rn->requires_grad) {
          for (std::size_t i = 0; i < m; ++i) {
            if (!mask.empty() && !mask[i]) continue;
            for (std::size_t j = 0; j < n; ++j)
              rn->grad[j] += self.grad[i * n + j];
          }
        }
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xd[i]);
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                [xn](TensorNode<T>& self) {
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    const T y = self.data[i];
                                    xn->grad[i] += self.grad[i] * (T(1) - y * y);
                                  }
                                });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-xd[i]));
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                [xn](TensorNode<T>& self) {
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    const T y = self.data[i];
                                    xn->grad[i] += self.grad[i] * y * (T(1) - y);
                                  }
                                });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xd[i] * gaussian_cdf(xd[i]);
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x}, [xn](TensorNode<T>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const T v = xn->data[i];
          xn->grad[i] += self.grad[i] * (gaussian_cdf(v) + v * gaussian_pdf(v));
        }
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.dim()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t len = s[axis];

  std::vector<T> out(x.numel());
  const auto& xd = x.node()->data;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = xd[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xd[base + k * inner]);
      T total = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const T e = std::exp(xd[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x},
      [xn, outer, inner, len](TensorNode<T>& self) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            T dot = 0;
            for (std::size_t k = 0; k < len; ++k) {
              const std::size_t i = base + k * inner;
              dot += self.grad[i] * self.data[i];
            }
            for (std::size_t k = 0; k < len; ++k) {
              const std::size_t i = base + k * inner;
              xn->grad[i] += self.data[i] * (self.grad[i] - dot);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T epsilon) {
  if (x.dim() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t m = x.numel() / n;
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: gamma/beta " + shape_str(gamma.shape()) +
                         "/" + shape_str(beta.shape()) +
                         " do not match last dimension of " +
                         shape_str(x.shape()));
  }
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(m);
  const auto& xd = x.node()->data;
  const auto& gd = gamma.node()->data;
  const auto& bd = beta.node()->data;
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xd.data() + i * n;
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= T(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(n);
    inv_std[i] = T(1) / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mean) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = gd[j] * h + bd[j];
    }
  }
  auto xn = x.node_ptr();
  auto gn = gamma.node_ptr();
  auto bn = beta.node_ptr();
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn, gn, bn, m, n, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](TensorNode<T>& self) {
        for (std::size_t i = 0; i < m; ++i) {
          const T* g = self.grad.data() + i * n;
          const T* h = xhat.data() + i * n;
          if (gn->requires_grad)
            for (std::size_t j = 0; j < n; ++j) gn->grad[j] += g[j] * h[j];
          if (bn->requires_grad)
            for (std::size_t j = 0; j < n; ++j) bn->grad[j] += g[j];
          if (!xn->requires_grad) continue;
          T mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < n; ++j) {
            const T dh = g[j] * gn->data[j];
            mean_dh += dh;
            mean_dh_h += dh * h[j];
          }
          mean_dh /= T(n);
          mean_dh_h /= T(n);
          for (std::size_t j = 0; j < n; ++j) {
            const T dh = g[j] * gn->data[j];
            xn->grad[i * n + j] += inv_std[i] * (dh - mean_dh - h[j] * mean_dh_h);
          }
        }
      });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows) {
  require_2d(x, "gather_rows");
  const std::size_t v = x.rows(), h = x.cols();
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  std::vector<T> out(idx.size() * h);
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw IndexError("row index " + std::to_string(idx[i]) +
                       " out of range [0, " + std::to_string(v) + ")");
    }
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(idx[i] * h), h,
                out.begin() + static_cast<std::ptrdiff_t>(i * h));
  }
  auto xn = x.node_ptr();
  const std::size_t count = idx.size();
  return Tensor<T>::make_result(
      {count, h}, std::move(out), {x},
      [xn, h, idx = std::move(idx)](TensorNode<T>& self) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          T* dst = xn->grad.data() + static_cast<std::size_t>(idx[i]) * h;
          const T* src = self.grad.data() + i * h;
          for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
        }
      });
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table,
                           std::span<const std::int32_t> ids) {
  return gather_rows(table, ids);
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts differ, " +
                           shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.cols();
  }
  std::vector<T> out(m * total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t c = p.cols();
    const auto& pd = p.node()->data;
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + off));
    off += c;
  }
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node_ptr());
  return Tensor<T>::make_result(
      {m, total}, std::move(out), parts,
      [nodes = std::move(nodes), offsets = std::move(offsets), m,
       total](TensorNode<T>& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          auto& p = *nodes[k];
          if (!p.requires_grad) continue;
          const std::size_t c = p.shape.back();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j)
              p.grad[i * c + j] += self.grad[i * total + offsets[k] + j];
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout probability must lie in [0, 1), got " +
                        std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const T keep_scale = T(1) / T(1.0 - p);
  std::vector<T> mask(x.numel());
  std::vector<T> out(x.numel());
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? T(0) : keep_scale;
    out[i] = xd[i] * mask[i];
  }
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                [xn, mask = std::move(mask)](TensorNode<T>& self) {
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                    xn->grad[i] += self.grad[i] * mask[i];
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  auto xn = x.node_ptr();
  return Tensor<T>::make_result({1}, {total}, {x}, [xn](TensorNode<T>& self) {
    const T g = self.grad[0];
    for (auto& v : xn->grad) v += g;
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                std::span<const std::int32_t> targets) {
  require_2d(logits, "softmax_cross_entropy");
  const std::size_t m = logits.rows(), c = logits.cols();
  if (targets.size() != m) {
    throw DimensionError("softmax_cross_entropy: " +
                         std::to_string(targets.size()) + " targets for " +
                         std::to_string(m) + " rows");
  }
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::vector<T> probs(m * c);
  T loss = 0;
  const auto& ld = logits.node()->data;
  for (std::size_t i = 0; i < m; ++i) {
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= c) {
      throw IndexError("target class " + std::to_string(tgt[i]) +
                       " out of range [0, " + std::to_string(c) + ")");
    }
    const T* row = ld.data() + i * c;
    T mx = *std::max_element(row, row + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      total += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= total;
    loss += -(row[tgt[i]] - mx - std::log(total));
  }
  auto ln = logits.node_ptr();
  return Tensor<T>::make_result(
      {1}, {loss}, {logits},
      [ln, c, tgt = std::move(tgt), probs = std::move(probs)](TensorNode<T>& self) {
        const T g = self.grad[0];
        for (std::size_t i = 0; i < tgt.size(); ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const T y = static_cast<std::size_t>(tgt[i]) == j ? T(1) : T(0);
            ln->grad[i * c + j] += g * (probs[i * c + j] - y);
          }
        }
      });
}

template <typename T>
Tensor<T> sigmoid_cross_entropy(const Tensor<T>& logits,
                                std::span<const T> targets) {
  if (targets.size() != logits.numel()) {
    throw DimensionError("sigmoid_cross_entropy: " +
                         std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()));
  }
  std::vector<T> tgt(targets.begin(), targets.end());
  T loss = 0;
  const auto& ld = logits.node()->data;
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    const T z = ld[i];
    loss += std::max(z, T(0)) - z * tgt[i] + std::log1p(std::exp(-std::abs(z)));
  }
  auto ln = logits.node_ptr();
  return Tensor<T>::make_result({1}, {loss}, {logits},
                                [ln, tgt = std::move(tgt)](TensorNode<T>& self) {
                                  const T g = self.grad[0];
                                  for (std::size_t i = 0; i < tgt.size(); ++i) {
                                    const T p = T(1) / (T(1) + std::exp(-ln->data[i]));
                                    ln->grad[i] += g * (p - tgt[i]);
                                  }
                                });
}

#define CELT_INSTANTIATE(T)                                                   \
  template class Tensor<T>;                                                   \
  template void backward<T>(const Tensor<T>&);                                \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> matmul_nt<T>(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                           \
  template Tensor<T> add_row<T>(const Tensor<T>&, const Tensor<T>&,           \
                                std::span<const std::uint8_t>);               \
  template Tensor<T> tanh<T>(const Tensor<T>&);                               \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                            \
  template Tensor<T> gelu<T>(const Tensor<T>&);                               \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);               \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&, T);                      \
  template Tensor<T> embedding_lookup<T>(const Tensor<T>&,                    \
                                         std::span<const std::int32_t>);      \
  template Tensor<T> gather_rows<T>(const Tensor<T>&,                         \
                                    std::span<const std::int32_t>);           \
  template Tensor<T> concat_cols<T>(const std::vector<Tensor<T>>&);           \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, Rng&);        \
  template Tensor<T> sum<T>(const Tensor<T>&);                                \
  template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&,               \
                                              std::span<const std::int32_t>); \
  template Tensor<T> sigmoid_cross_entropy<T>(const Tensor<T>&,               \
                                              std::span<const T>);

CELT_INSTANTIATE(float)
CELT_INSTANTIATE(double)

#undef CELT_INSTANTIATE

}  // namespace celt
