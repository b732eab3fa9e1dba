#pragma once

// Differentiable primitives. Every backward rule adds into the parent
// gradient buffers; none of them overwrite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "swinqa/tensor.hpp"

namespace swinqa {

class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " +
                           to_string(b));
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

// For every flat index of `out`, the flat index into a tensor of shape `in`
// that broadcasts onto it.
inline std::vector<std::size_t> broadcast_offsets(const Shape& out, const Shape& in) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + (rank - in.size());
    stride[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const std::size_t total = numel_of(out);
  std::vector<std::size_t> offsets(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    offsets[flat] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out[d]) break;
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return offsets;
}

// C[m,n] += A[m,k] * B[k,n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline std::size_t normalize_axis(long axis, std::size_t rank, const char* op) {
  const long r = static_cast<long>(rank);
  if (axis < -r || axis >= r) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic with numpy-style broadcasting.

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_result<T>("add", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
      for (std::size_t p = 0; p < 2; ++p) {
        if (auto* g = detail::parent_grad(self, p)) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
        }
      }
    });
  }
  Shape shape = detail::broadcast_shapes(a.shape(), b.shape(), "add");
  auto oa = detail::broadcast_offsets(shape, a.shape());
  auto ob = detail::broadcast_offsets(shape, b.shape());
  std::vector<T> out(oa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[oa[i]] + b.data()[ob[i]];
  return detail::make_result<T>("add", std::move(shape), std::move(out), {&a, &b},
                                [oa = std::move(oa), ob = std::move(ob)](Node<T>& self) {
                                  if (auto* g = detail::parent_grad(self, 0)) {
                                    for (std::size_t i = 0; i < oa.size(); ++i) (*g)[oa[i]] += self.grad[i];
                                  }
                                  if (auto* g = detail::parent_grad(self, 1)) {
                                    for (std::size_t i = 0; i < ob.size(); ++i) (*g)[ob[i]] += self.grad[i];
                                  }
                                });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Shape shape = detail::broadcast_shapes(a.shape(), b.shape(), "mul");
  auto oa = detail::broadcast_offsets(shape, a.shape());
  auto ob = detail::broadcast_offsets(shape, b.shape());
  std::vector<T> out(oa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[oa[i]] * b.data()[ob[i]];
  return detail::make_result<T>(
      "mul", std::move(shape), std::move(out), {&a, &b},
      [oa = std::move(oa), ob = std::move(ob)](Node<T>& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (auto* g = detail::parent_grad(self, 0)) {
          for (std::size_t i = 0; i < oa.size(); ++i) (*g)[oa[i]] += self.grad[i] * bv[ob[i]];
        }
        if (auto* g = detail::parent_grad(self, 1)) {
          for (std::size_t i = 0; i < ob.size(); ++i) (*g)[ob[i]] += self.grad[i] * av[oa[i]];
        }
      });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return detail::make_result<T>("scale", x.shape(), std::move(out), {&x}, [factor](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * factor;
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return detail::make_result<T>("sum", {1}, {acc}, {&x}, [](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    for (auto& v : *g) v += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// Mean over one axis; the axis is removed from the result.
template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, long axis_in) {
  const std::size_t axis = detail::normalize_axis(axis_in, x.dim(), "mean_axis");
  const auto& s = x.shape();
  const std::size_t outer = numel_of(Shape(s.begin(), s.begin() + axis));
  const std::size_t len = s[axis];
  const std::size_t inner = numel_of(Shape(s.begin() + axis + 1, s.end()));
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<T> out(outer * inner, T(0));
  const T inv = T(1) / static_cast<T>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const T* src = x.data().data() + (o * len + l) * inner;
      T* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out) v *= inv;
  return detail::make_result<T>("mean_axis", std::move(out_shape), std::move(out), {&x},
                                [outer, len, inner, inv](Node<T>& self) {
                                  auto* g = detail::parent_grad(self, 0);
                                  for (std::size_t o = 0; o < outer; ++o) {
                                    for (std::size_t l = 0; l < len; ++l) {
                                      T* dst = g->data() + (o * len + l) * inner;
                                      const T* src = self.grad.data() + o * inner;
                                      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
                                    }
                                  }
                                });
}

// Single element by flat index, as a scalar tensor.
template <class T>
Tensor<T> element(const Tensor<T>& x, std::size_t flat) {
  if (flat >= x.numel()) throw DimensionError("element: index out of range");
  return detail::make_result<T>("element", {1}, {x.data()[flat]}, {&x}, [flat](Node<T>& self) {
    (*detail::parent_grad(self, 0))[flat] += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Matrix products.

// Batched product over the last two axes; leading (batch) axes broadcast.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  auto mismatch = [&] {
    return DimensionError("matmul: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) throw mismatch();
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
  if (sb[sb.size() - 2] != k) throw mismatch();
  const Shape ba(sa.begin(), sa.end() - 2), bb(sb.begin(), sb.end() - 2);
  Shape batch;
  try {
    batch = detail::broadcast_shapes(ba, bb, "matmul");
  } catch (const DimensionError&) {
    throw mismatch();
  }
  auto oa = detail::broadcast_offsets(batch, ba);
  auto ob = detail::broadcast_offsets(batch, bb);
  const std::size_t nb = oa.size();
  std::vector<T> out(nb * m * n, T(0));
  for (std::size_t i = 0; i < nb; ++i) {
    detail::gemm_nn(m, n, k, a.data().data() + oa[i] * m * k, b.data().data() + ob[i] * k * n,
                    out.data() + i * m * n);
  }
  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(n);
  return detail::make_result<T>(
      "matmul", std::move(shape), std::move(out), {&a, &b},
      [oa = std::move(oa), ob = std::move(ob), m, n, k](Node<T>& self) {
        const T* av = self.parents[0]->value.data();
        const T* bv = self.parents[1]->value.data();
        auto* ga = detail::parent_grad(self, 0);
        auto* gb = detail::parent_grad(self, 1);
        for (std::size_t i = 0; i < oa.size(); ++i) {
          const T* g = self.grad.data() + i * m * n;
          if (ga) detail::gemm_nt(m, k, n, g, bv + ob[i] * k * n, ga->data() + oa[i] * m * k);
          if (gb) detail::gemm_tn(k, n, m, av + oa[i] * m * k, g, gb->data() + ob[i] * k * n);
        }
      });
}

// Affine map over the last axis: x[..., in] * weight[in, out] + bias[out].
// `bias` may be an undefined tensor.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const auto& sx = x.shape();
  const auto& sw = weight.shape();
  if (sw.size() != 2 || sx.back() != sw[0] || (bias.defined() && bias.shape() != Shape{sw[1]})) {
    throw DimensionError("linear: input " + to_string(sx) + " incompatible with weight " + to_string(sw) +
                         (bias.defined() ? " and bias " + to_string(bias.shape()) : std::string()));
  }
  const std::size_t k = sw[0], n = sw[1], rows = x.numel() / k;
  std::vector<T> out(rows * n, T(0));
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) std::copy(bias.data().begin(), bias.data().end(), out.begin() + r * n);
  }
  detail::gemm_nn(rows, n, k, x.data().data(), weight.data().data(), out.data());
  Shape shape = sx;
  shape.back() = n;
  auto backward = [rows, n, k](Node<T>& self) {
    const T* g = self.grad.data();
    if (auto* gx = detail::parent_grad(self, 0)) {
      detail::gemm_nt(rows, k, n, g, self.parents[1]->value.data(), gx->data());
    }
    if (auto* gw = detail::parent_grad(self, 1)) {
      detail::gemm_tn(k, n, rows, self.parents[0]->value.data(), g, gw->data());
    }
    if (self.parents.size() > 2) {
      if (auto* gb = detail::parent_grad(self, 2)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[r * n + j];
        }
      }
    }
  };
  if (bias.defined()) {
    return detail::make_result<T>("linear", std::move(shape), std::move(out), {&x, &weight, &bias}, backward);
  }
  return detail::make_result<T>("linear", std::move(shape), std::move(out), {&x, &weight}, backward);
}

// ---------------------------------------------------------------------------
// Layout ops.

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  return detail::make_result<T>("reshape", std::move(shape), x.values(), {&x}, [](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

// out axis i is input axis perm[i].
template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  const auto& s = x.shape();
  const std::size_t rank = s.size();
  if (perm.size() != rank) throw DimensionError("permute: rank mismatch for " + to_string(s));
  std::vector<bool> used(rank, false);
  for (auto p : perm) {
    if (p >= rank || used[p]) throw DimensionError("permute: invalid permutation for " + to_string(s));
    used[p] = true;
  }
  std::vector<std::size_t> in_stride(rank);
  std::size_t st = 1;
  for (std::size_t i = rank; i-- > 0;) {
    in_stride[i] = st;
    st *= s[i];
  }
  Shape out_shape(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = s[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  const std::size_t total = x.numel();
  std::vector<std::size_t> src(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    src[flat] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out_shape[d]) break;
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  std::vector<T> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = x.data()[src[i]];
  return detail::make_result<T>("permute", std::move(out_shape), std::move(out), {&x},
                                [src = std::move(src)](Node<T>& self) {
                                  auto* g = detail::parent_grad(self, 0);
                                  for (std::size_t i = 0; i < src.size(); ++i) (*g)[src[i]] += self.grad[i];
                                });
}

// Cyclic roll along one axis: out[.., (i + shift) mod n, ..] = x[.., i, ..].
template <class T>
Tensor<T> roll(const Tensor<T>& x, long axis_in, long shift) {
  const std::size_t axis = detail::normalize_axis(axis_in, x.dim(), "roll");
  const auto& s = x.shape();
  const std::size_t outer = numel_of(Shape(s.begin(), s.begin() + axis));
  const std::size_t len = s[axis];
  const std::size_t inner = numel_of(Shape(s.begin() + axis + 1, s.end()));
  const long n = static_cast<long>(len);
  const std::size_t sh = static_cast<std::size_t>(((shift % n) + n) % n);
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < len; ++i) {
      const T* src = x.data().data() + (o * len + i) * inner;
      T* dst = out.data() + (o * len + (i + sh) % len) * inner;
      std::copy(src, src + inner, dst);
    }
  }
  return detail::make_result<T>("roll", s, std::move(out), {&x}, [outer, len, inner, sh](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < len; ++i) {
        T* dst = g->data() + (o * len + i) * inner;
        const T* src = self.grad.data() + (o * len + (i + sh) % len) * inner;
        for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
      }
    }
  });
}

// x[index] along the leading axis.
template <class T>
Tensor<T> select(const Tensor<T>& x, std::size_t index) {
  const auto& s = x.shape();
  if (s.size() < 2 || index >= s[0]) {
    throw DimensionError("select: index " + std::to_string(index) + " invalid for " + to_string(s));
  }
  const Shape shape(s.begin() + 1, s.end());
  const std::size_t block = numel_of(shape);
  std::vector<T> out(x.data().begin() + index * block, x.data().begin() + (index + 1) * block);
  return detail::make_result<T>("select", shape, std::move(out), {&x}, [index, block](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < block; ++i) (*g)[index * block + i] += self.grad[i];
  });
}

// Rows of a [R, C] table picked by `rows`, giving [rows.size(), C].
template <class T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::size_t>& rows) {
  if (table.dim() != 2) throw DimensionError("gather_rows: table must be 2-d, got " + to_string(table.shape()));
  const std::size_t r = table.size(0), c = table.size(1);
  std::vector<T> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= r) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(table.data().begin() + rows[i] * c, c, out.begin() + i * c);
  }
  return detail::make_result<T>("gather_rows", {rows.size(), c}, std::move(out), {&table},
                                [rows, c](Node<T>& self) {
                                  auto* g = detail::parent_grad(self, 0);
                                  for (std::size_t i = 0; i < rows.size(); ++i) {
                                    for (std::size_t j = 0; j < c; ++j) (*g)[rows[i] * c + j] += self.grad[i * c + j];
                                  }
                                });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization.

template <class T>
Tensor<T> softmax(const Tensor<T>& x, long axis_in = -1) {
  const std::size_t axis = detail::normalize_axis(axis_in, x.dim(), "softmax");
  const auto& s = x.shape();
  const std::size_t outer = numel_of(Shape(s.begin(), s.begin() + axis));
  const std::size_t len = s[axis];
  const std::size_t inner = numel_of(Shape(s.begin() + axis + 1, s.end()));
  std::vector<T> out(x.numel());
  const T* in = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, in[base + l * inner]);
      T denom = 0;
      for (std::size_t l = 0; l < len; ++l) {
        const T e = std::exp(in[base + l * inner] - mx);
        out[base + l * inner] = e;
        denom += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= denom;
    }
  }
  return detail::make_result<T>("softmax", s, std::move(out), {&x}, [outer, len, inner](Node<T>& self) {
    auto* g = detail::parent_grad(self, 0);
    const auto& y = self.value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        T dot = 0;
        for (std::size_t l = 0; l < len; ++l) dot += self.grad[base + l * inner] * y[base + l * inner];
        for (std::size_t l = 0; l < len; ++l) {
          const std::size_t at = base + l * inner;
          (*g)[at] += y[at] * (self.grad[at] - dot);
        }
      }
    }
  });
}

// Normalizes over the last axis, then applies gamma * xhat + beta.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw DimensionError("layer_norm: input " + to_string(x.shape()) + " with gamma " + to_string(gamma.shape()) +
                         " and beta " + to_string(beta.shape()));
  }
  if (!(eps > T(0))) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  const T* in = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gamma.data()[j] + beta.data()[j];
    }
  }
  return detail::make_result<T>(
      "layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        const auto& gam = self.parents[1]->value;
        auto* gx = detail::parent_grad(self, 0);
        auto* gg = detail::parent_grad(self, 1);
        auto* gb = detail::parent_grad(self, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = self.grad.data() + r * d;
          const T* h = xhat.data() + r * d;
          if (gg || gb) {
            for (std::size_t j = 0; j < d; ++j) {
              if (gg) (*gg)[j] += g[j] * h[j];
              if (gb) (*gb)[j] += g[j];
            }
          }
          if (gx) {
            T mean_dh = 0, mean_dh_h = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const T dh = g[j] * gam[j];
              mean_dh += dh;
              mean_dh_h += dh * h[j];
            }
            mean_dh /= static_cast<T>(d);
            mean_dh_h /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) {
              (*gx)[r * d + j] += rstd[r] * (g[j] * gam[j] - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

// Exact Gaussian-error GELU: x * Phi(x).
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = v * T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
  }
  return detail::make_result<T>("gelu", x.shape(), std::move(out), {&x}, [](Node<T>& self) {
    constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
    constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    auto* g = detail::parent_grad(self, 0);
    const auto& in = self.parents[0]->value;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T v = in[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      (*g)[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

// Batch mean of -sum_k t_k log softmax(z)_k. Targets are treated as constants.
template <class T>
Tensor<T> cross_entropy_soft(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.dim() != 2 || logits.shape() != targets.shape()) {
    throw DimensionError("cross_entropy_soft: logits " + to_string(logits.shape()) + " vs targets " +
                         to_string(targets.shape()));
  }
  const std::size_t b = logits.size(0), k = logits.size(1);
  std::vector<T> probs(b * k);
  double total = 0;
  for (std::size_t r = 0; r < b; ++r) {
    const T* z = logits.data().data() + r * k;
    const T* t = targets.data().data() + r * k;
    double row_sum = 0;
    for (std::size_t j = 0; j < k; ++j) row_sum += t[j];
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw LabelError("cross_entropy_soft: target row " + std::to_string(r) + " sums to " +
                       std::to_string(row_sum));
    }
    T mx = *std::max_element(z, z + k);
    T denom = 0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - mx);
    const T log_denom = std::log(denom);
    for (std::size_t j = 0; j < k; ++j) {
      const T logp = z[j] - mx - log_denom;
      probs[r * k + j] = std::exp(logp);
      if (t[j] != T(0)) total -= static_cast<double>(t[j] * logp);
    }
  }
  const T loss = static_cast<T>(total / static_cast<double>(b));
  // Only logits receive a gradient.
  auto out = detail::make_result<T>("cross_entropy_soft", {1}, {loss}, {&logits},
                                    [probs = std::move(probs), b, targets](Node<T>& self) {
                                      auto* g = detail::parent_grad(self, 0);
                                      const T s = self.grad[0] / static_cast<T>(b);
                                      const auto& t = targets.values();
                                      for (std::size_t i = 0; i < probs.size(); ++i) (*g)[i] += s * (probs[i] - t[i]);
                                    });
  return out;
}

}  // namespace swinqa
