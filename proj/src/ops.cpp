#include "rsssm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace rsssm {

namespace {

struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Strides of `s` laid out inside broadcast shape `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
  std::vector<std::size_t> st(out.size(), 0);
  const auto own = strides_of(s);
  const std::size_t pad = out.size() - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) st[pad + i] = s[i] == 1 ? 0 : own[i];
  return st;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t total = numel(out);
  if (total == 0) return;
  const std::size_t r = out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  const std::size_t last = out[r - 1];
  const std::size_t la = sa[r - 1], lb = sb[r - 1];
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < total; o += last) {
    for (std::size_t j = 0; j < last; ++j) f(o + j, ia + j * la, ib + j * lb);
    // advance the odometer over the leading axes
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <typename T>
T binary_apply(Binary op, T x, T y) {
  switch (op) {
    case Binary::Add: return x + y;
    case Binary::Sub: return x - y;
    case Binary::Mul: return x * y;
    case Binary::Div: return x / y;
  }
  return T(0);
}

template <typename T>
void check_denominators(std::span<const T> d, std::string_view op) {
  if (!debug_checks()) return;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == T(0)) {
      throw NumericError(std::string("zero denominator at flat index ") + std::to_string(i) +
                         " in '" + std::string(op) + "'");
    }
  }
}

// Plain row-major C += A * B, i-k-j order.
template <typename T>
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aik = arow[p];
      if (aik == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transpose_data(std::span<const T> a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(a.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

template <typename T>
Tensor<T> unary_map(const Tensor<T>& a, std::string_view name, T (*f)(T),
                    T (*df)(T x, T y)) {
  const auto x = a.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result<T>(a.shape(), std::move(y), name, {a}, [df](Node<T>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(in.data[i], self.data[i]);
  });
}

template <typename T> T f_exp(T x) { return std::exp(x); }
template <typename T> T d_exp(T, T y) { return y; }
template <typename T> T f_log(T x) { return std::log(x); }
template <typename T> T d_log(T x, T) { return T(1) / x; }
template <typename T> T f_sqrt(T x) { return std::sqrt(x); }
template <typename T> T d_sqrt(T, T y) { return T(0.5) / y; }
template <typename T> T f_neg(T x) { return -x; }
template <typename T> T d_neg(T, T) { return T(-1); }
template <typename T> T f_recip(T x) { return T(1) / x; }
template <typename T> T d_recip(T, T y) { return -y * y; }
template <typename T> T f_square(T x) { return x * x; }
template <typename T> T d_square(T x, T) { return T(2) * x; }

template <typename T> T f_gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}
template <typename T> T d_gelu(T x, T) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <typename T> T f_softplus(T x) {
  if (x > T(20)) return x;
  return std::log1p(std::exp(x));
}
template <typename T> T d_softplus(T x, T) { return T(1) / (T(1) + std::exp(-x)); }

template <typename T> T f_expm1_ratio(T x) {
  if (std::abs(x) < T(1e-5)) return T(1) + x / T(2) + x * x / T(6);
  return std::expm1(x) / x;
}
template <typename T> T d_expm1_ratio(T x, T) {
  if (std::abs(x) < T(1e-3)) return T(0.5) + x / T(3) + x * x / T(8);
  return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) +
                       " are not broadcast-compatible");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

template <typename T>
Tensor<T> elementwise(Binary op, const Tensor<T>& a, const Tensor<T>& b) {
  static constexpr std::string_view names[] = {"add", "sub", "mul", "div"};
  const auto name = names[static_cast<int>(op)];
  const Shape out = broadcast_shape(a.shape(), b.shape());
  if (op == Binary::Div) check_denominators(b.data(), name);
  const auto xa = a.data();
  const auto xb = b.data();
  std::vector<T> y(numel(out));
  const bool same = a.shape() == b.shape();
  if (same) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = binary_apply(op, xa[i], xb[i]);
  } else {
    const auto sa = broadcast_strides(a.shape(), out);
    const auto sb = broadcast_strides(b.shape(), out);
    for_each_broadcast(out, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      y[o] = binary_apply(op, xa[ia], xb[ib]);
    });
  }
  return make_result<T>(out, std::move(y), name, {a, b}, [op, out, same](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const auto& g = self.grad;
    auto rule = [&](std::size_t o, std::size_t ia, std::size_t ib) {
      const T x = na.data[ia], z = nb.data[ib];
      switch (op) {
        case Binary::Add:
          if (na.requires_grad) na.grad[ia] += g[o];
          if (nb.requires_grad) nb.grad[ib] += g[o];
          break;
        case Binary::Sub:
          if (na.requires_grad) na.grad[ia] += g[o];
          if (nb.requires_grad) nb.grad[ib] -= g[o];
          break;
        case Binary::Mul:
          if (na.requires_grad) na.grad[ia] += g[o] * z;
          if (nb.requires_grad) nb.grad[ib] += g[o] * x;
          break;
        case Binary::Div:
          if (na.requires_grad) na.grad[ia] += g[o] / z;
          if (nb.requires_grad) nb.grad[ib] -= g[o] * x / (z * z);
          break;
      }
    };
    if (na.requires_grad) na.grad_buffer();
    if (nb.requires_grad) nb.grad_buffer();
    if (same) {
      for (std::size_t i = 0; i < g.size(); ++i) rule(i, i, i);
    } else {
      for_each_broadcast(out, broadcast_strides(na.shape, out), broadcast_strides(nb.shape, out),
                         rule);
    }
  });
}

template <typename T>
Tensor<T> elementwise(Binary op, const Tensor<T>& a, std::type_identity_t<T> s) {
  static constexpr std::string_view names[] = {"add_scalar", "sub_scalar", "mul_scalar",
                                               "div_scalar"};
  if (op == Binary::Div && debug_checks() && s == T(0)) {
    throw NumericError("division by a zero scalar");
  }
  const auto x = a.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = binary_apply(op, x[i], s);
  return make_result<T>(a.shape(), std::move(y), names[static_cast<int>(op)], {a},
                        [op, s](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          auto& g = in.grad_buffer();
                          T scale = T(1);
                          if (op == Binary::Mul) scale = s;
                          if (op == Binary::Div) scale = T(1) / s;
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * scale;
                        });
}

template <typename T>
Tensor<T> elementwise(Unary op, const Tensor<T>& a) {
  switch (op) {
    case Unary::Exp: return unary_map<T>(a, "exp", f_exp<T>, d_exp<T>);
    case Unary::Log: return unary_map<T>(a, "log", f_log<T>, d_log<T>);
    case Unary::Sqrt: return unary_map<T>(a, "sqrt", f_sqrt<T>, d_sqrt<T>);
    case Unary::Neg: return unary_map<T>(a, "neg", f_neg<T>, d_neg<T>);
    case Unary::Reciprocal:
      check_denominators(a.data(), "reciprocal");
      return unary_map<T>(a, "reciprocal", f_recip<T>, d_recip<T>);
  }
  throw std::logic_error("unknown unary op");
}

template <typename T> Tensor<T> square(const Tensor<T>& a) { return unary_map<T>(a, "square", f_square<T>, d_square<T>); }
template <typename T> Tensor<T> gelu(const Tensor<T>& a) { return unary_map<T>(a, "gelu", f_gelu<T>, d_gelu<T>); }
template <typename T> Tensor<T> softplus(const Tensor<T>& a) { return unary_map<T>(a, "softplus", f_softplus<T>, d_softplus<T>); }
template <typename T> Tensor<T> expm1_ratio(const Tensor<T>& a) { return unary_map<T>(a, "expm1_ratio", f_expm1_ratio<T>, d_expm1_ratio<T>); }

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul needs [m x k] * [k x n], got " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> y(m * n, T(0));
  gemm_acc(m, k, n, a.data().data(), b.data().data(), y.data());
  return make_result<T>({m, n}, std::move(y), "matmul", {a, b}, [m, k, n](Node<T>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      // dA = dY * B^T
      const auto bt = transpose_data<T>(nb.data, k, n);
      gemm_acc(m, n, k, self.grad.data(), bt.data(), na.grad_buffer().data());
    }
    if (nb.requires_grad) {
      // dB = A^T * dY
      const auto at = transpose_data<T>(na.data, m, k);
      gemm_acc(k, m, n, at.data(), self.grad.data(), nb.grad_buffer().data());
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  return make_result<T>({c, r}, transpose_data<T>(a.data(), r, c), "transpose", {a},
                        [r, c](Node<T>& self) {
                          const auto back = transpose_data<T>(self.grad, c, r);
                          accumulate<T>(*self.inputs[0], back);
                        });
}

namespace {

template <typename T>
Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

template <typename T>
ArgReduceResult<T> arg_reduce(const Tensor<T>& a, int axis_in, bool keepdim, bool want_max) {
  const std::size_t axis = normalize_axis(axis_in, a.rank());
  const AxisView v = axis_view(a.shape(), axis);
  if (v.n == 0) throw ShapeError("reduction over an empty axis");
  const auto x = a.data();
  std::vector<T> y(v.outer * v.inner);
  std::vector<std::size_t> idx(y.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const T* base = x.data() + o * v.n * v.inner + i;
      std::size_t best = 0;
      for (std::size_t j = 1; j < v.n; ++j) {
        const T cand = base[j * v.inner];
        if (want_max ? cand > base[best * v.inner] : cand < base[best * v.inner]) best = j;
      }
      y[o * v.inner + i] = base[best * v.inner];
      idx[o * v.inner + i] = best;
    }
  }
  auto shared_idx = std::make_shared<std::vector<std::size_t>>(idx);
  auto values = make_result<T>(reduced_shape<T>(a.shape(), axis, keepdim), std::move(y),
                               want_max ? "max" : "min", {a}, [v, shared_idx](Node<T>& self) {
                                 auto& g = self.inputs[0]->grad_buffer();
                                 for (std::size_t o = 0; o < v.outer; ++o)
                                   for (std::size_t i = 0; i < v.inner; ++i) {
                                     const std::size_t r = o * v.inner + i;
                                     g[(o * v.n + (*shared_idx)[r]) * v.inner + i] += self.grad[r];
                                   }
                               });
  return {values, std::move(idx)};
}

}  // namespace

template <typename T>
ArgReduceResult<T> max_with_index(const Tensor<T>& a, int axis, bool keepdim) {
  return arg_reduce(a, axis, keepdim, true);
}

template <typename T>
ArgReduceResult<T> min_with_index(const Tensor<T>& a, int axis, bool keepdim) {
  return arg_reduce(a, axis, keepdim, false);
}

template <typename T>
Tensor<T> reduce(Reduce op, const Tensor<T>& a, int axis_in, bool keepdim) {
  if (op == Reduce::Max) return max_with_index(a, axis_in, keepdim).values;
  if (op == Reduce::Min) return min_with_index(a, axis_in, keepdim).values;
  const std::size_t axis = normalize_axis(axis_in, a.rank());
  const AxisView v = axis_view(a.shape(), axis);
  if (v.n == 0) throw ShapeError("reduction over an empty axis");
  const auto x = a.data();
  std::vector<T> y(v.outer * v.inner, T(0));
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t j = 0; j < v.n; ++j) {
      const T* row = x.data() + (o * v.n + j) * v.inner;
      T* dst = y.data() + o * v.inner;
      if (op == Reduce::L2) {
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += row[i] * row[i];
      } else {
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += row[i];
      }
    }
  if (op == Reduce::Mean) {
    for (auto& e : y) e /= static_cast<T>(v.n);
  } else if (op == Reduce::L2) {
    for (auto& e : y) e = std::sqrt(e);
  }
  static constexpr std::string_view names[] = {"sum", "mean", "max", "min", "l2_norm"};
  return make_result<T>(
      reduced_shape<T>(a.shape(), axis, keepdim), std::move(y), names[static_cast<int>(op)], {a},
      [op, v](Node<T>& self) {
        auto& in = *self.inputs[0];
        auto& g = in.grad_buffer();
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t j = 0; j < v.n; ++j)
            for (std::size_t i = 0; i < v.inner; ++i) {
              const std::size_t src = (o * v.n + j) * v.inner + i;
              const std::size_t r = o * v.inner + i;
              T d = self.grad[r];
              if (op == Reduce::Mean) {
                d /= static_cast<T>(v.n);
              } else if (op == Reduce::L2) {
                d = self.data[r] > T(0) ? d * in.data[src] / self.data[r] : T(0);
              }
              g[src] += d;
            }
      });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  return reduce(Reduce::Sum, reshape(a, {a.numel()}), 0, false);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return reduce(Reduce::Mean, reshape(a, {a.numel()}), 0, false);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis_in) {
  const std::size_t axis = normalize_axis(axis_in, a.rank());
  const AxisView v = axis_view(a.shape(), axis);
  const auto x = a.data();
  std::vector<T> y(x.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < v.n; ++j) peak = std::max(peak, x[base + j * v.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < v.n; ++j) {
        const T e = std::exp(x[base + j * v.inner] - peak);
        y[base + j * v.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < v.n; ++j) y[base + j * v.inner] /= total;
    }
  return make_result<T>(a.shape(), std::move(y), "softmax", {a}, [v](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.n * v.inner + i;
        T dot = T(0);
        for (std::size_t j = 0; j < v.n; ++j) {
          const std::size_t k = base + j * v.inner;
          dot += self.grad[k] * self.data[k];
        }
        for (std::size_t j = 0; j < v.n; ++j) {
          const std::size_t k = base + j * v.inner;
          g[k] += self.data[k] * (self.grad[k] - dot);
        }
      }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  const auto x = a.data();
  return make_result<T>(std::move(shape), std::vector<T>(x.begin(), x.end()), "reshape", {a},
                        [](Node<T>& self) { accumulate<T>(*self.inputs[0], self.grad); });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& perm) {
  const Shape& s = a.shape();
  const std::size_t r = s.size();
  if (perm.size() != r) throw ShapeError("permutation rank mismatch for " + shape_str(s));
  std::vector<bool> used(r, false);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || used[perm[i]]) throw ShapeError("invalid permutation for " + shape_str(s));
    used[perm[i]] = true;
    out[i] = s[perm[i]];
  }
  // src_strides[i]: stride in the source of output axis i
  const auto in_st = strides_of(s);
  std::vector<std::size_t> src_st(r), zero(r, 0);
  for (std::size_t i = 0; i < r; ++i) src_st[i] = in_st[perm[i]];
  const auto x = a.data();
  std::vector<T> y(x.size());
  for_each_broadcast(out, src_st, zero,
                     [&](std::size_t o, std::size_t is, std::size_t) { y[o] = x[is]; });
  return make_result<T>(out, std::move(y), "permute", {a}, [out, src_st, zero](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for_each_broadcast(out, src_st, zero,
                       [&](std::size_t o, std::size_t is, std::size_t) { g[is] += self.grad[o]; });
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis_in) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t axis = normalize_axis(axis_in, parts[0].rank());
  Shape out = parts[0].shape();
  out[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out.size()) throw ShapeError("concat rank mismatch: " + shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out[i]) {
        throw ShapeError("concat shape mismatch: " + shape_str(parts[0].shape()) + " vs " +
                         shape_str(s));
      }
    }
    widths.push_back(s[axis]);
    out[axis] += s[axis];
  }
  const AxisView v = axis_view(out, axis);
  std::vector<T> y(numel(out));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto x = parts[p].data();
    const std::size_t chunk = widths[p] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(x.data() + o * chunk, chunk, y.data() + o * v.n * v.inner + offset);
    offset += chunk;
  }
  return make_result<T>(out, std::move(y), "concat", parts, [v, widths](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      auto& in = *self.inputs[p];
      const std::size_t chunk = widths[p] * v.inner;
      if (in.requires_grad) {
        auto& g = in.grad_buffer();
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t i = 0; i < chunk; ++i)
            g[o * chunk + i] += self.grad[o * v.n * v.inner + offset + i];
      }
      offset += chunk;
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis_in, std::size_t begin, std::size_t end) {
  const std::size_t axis = normalize_axis(axis_in, a.rank());
  const AxisView v = axis_view(a.shape(), axis);
  if (begin > end || end > v.n) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(a.shape()));
  }
  Shape out = a.shape();
  out[axis] = end - begin;
  const std::size_t chunk = (end - begin) * v.inner;
  const auto x = a.data();
  std::vector<T> y(numel(out));
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(x.data() + (o * v.n + begin) * v.inner, chunk, y.data() + o * chunk);
  return make_result<T>(out, std::move(y), "slice", {a}, [v, begin, chunk](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < chunk; ++i)
        g[(o * v.n + begin) * v.inner + i] += self.grad[o * chunk + i];
  });
}

template <typename T>
Tensor<T> select(const Tensor<T>& a, int axis_in, std::size_t index) {
  const std::size_t axis = normalize_axis(axis_in, a.rank());
  Shape out = a.shape();
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return reshape(slice(a, static_cast<int>(axis), index, index + 1), out);
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& a, std::size_t rows, std::size_t cols) {
  if (a.rank() < 2) throw ShapeError("pad2d needs rank >= 2, got " + shape_str(a.shape()));
  const std::size_t h = a.dim(-2), w = a.dim(-1);
  if (rows < h || cols < w) throw ShapeError("pad2d target smaller than " + shape_str(a.shape()));
  if (rows == h && cols == w) return a;
  const std::size_t planes = a.numel() / (h * w);
  Shape out = a.shape();
  out[out.size() - 2] = rows;
  out[out.size() - 1] = cols;
  const auto x = a.data();
  std::vector<T> y(planes * rows * cols, T(0));
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(x.data() + (p * h + r) * w, w, y.data() + (p * rows + r) * cols);
  return make_result<T>(out, std::move(y), "pad2d", {a}, [planes, h, w, rows, cols](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) g[(p * h + r) * w + c] += self.grad[(p * rows + r) * cols + c];
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps) {
  const std::size_t c = x.dim(-1);
  if (gain.numel() != c || bias.numel() != c) {
    throw ShapeError("layer_norm affine size mismatch: input " + shape_str(x.shape()) + ", gain " +
                     shape_str(gain.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / c;
  const auto in = x.data();
  const auto gm = gain.data();
  const auto bt = bias.data();
  std::vector<T> y(in.size());
  auto xhat = std::make_shared<std::vector<T>>(in.size());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * c;
    T mu = T(0);
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<T>(c);
    T var = T(0);
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(c);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const T xh = (row[j] - mu) * rs;
      (*xhat)[r * c + j] = xh;
      y[r * c + j] = xh * gm[j] + bt[j];
    }
  }
  return make_result<T>(x.shape(), std::move(y), "layer_norm", {x, gain, bias},
                        [rows, c, xhat, rstd](Node<T>& self) {
                          auto& nx = *self.inputs[0];
                          auto& ng = *self.inputs[1];
                          auto& nb = *self.inputs[2];
                          const auto& g = self.grad;
                          if (ng.requires_grad || nb.requires_grad) {
                            auto& gg = ng.grad_buffer();
                            auto& gb = nb.grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < c; ++j) {
                                gg[j] += g[r * c + j] * (*xhat)[r * c + j];
                                gb[j] += g[r * c + j];
                              }
                          }
                          if (!nx.requires_grad) return;
                          auto& gx = nx.grad_buffer();
                          std::vector<T> gxh(c);
                          for (std::size_t r = 0; r < rows; ++r) {
                            T m1 = T(0), m2 = T(0);
                            for (std::size_t j = 0; j < c; ++j) {
                              gxh[j] = g[r * c + j] * ng.data[j];
                              m1 += gxh[j];
                              m2 += gxh[j] * (*xhat)[r * c + j];
                            }
                            m1 /= static_cast<T>(c);
                            m2 /= static_cast<T>(c);
                            for (std::size_t j = 0; j < c; ++j)
                              gx[r * c + j] += (*rstd)[r] * (gxh[j] - m1 - (*xhat)[r * c + j] * m2);
                          }
                        });
}

namespace {

struct LerpTap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LerpTap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t rows, std::size_t cols) {
  if (x.rank() < 2) throw ShapeError("upsample needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t h = x.dim(-2), w = x.dim(-1);
  const std::size_t planes = x.numel() / (h * w);
  const auto ty = bilinear_taps(h, rows);
  const auto tx = bilinear_taps(w, cols);
  Shape out = x.shape();
  out[out.size() - 2] = rows;
  out[out.size() - 1] = cols;
  const auto in = x.data();
  std::vector<T> y(planes * rows * cols);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = in.data() + p * h * w;
    T* dst = y.data() + p * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& a = ty[r];
      const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
      for (std::size_t c = 0; c < cols; ++c) {
        const auto& b = tx[c];
        const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
        dst[r * cols + c] = wy0 * (wx0 * src[a.i0 * w + b.i0] + wx1 * src[a.i0 * w + b.i1]) +
                            wy1 * (wx0 * src[a.i1 * w + b.i0] + wx1 * src[a.i1 * w + b.i1]);
      }
    }
  }
  return make_result<T>(out, std::move(y), "upsample_bilinear", {x},
                        [planes, h, w, rows, cols, ty, tx](Node<T>& self) {
                          auto& g = self.inputs[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p) {
                            T* dst = g.data() + p * h * w;
                            const T* go = self.grad.data() + p * rows * cols;
                            for (std::size_t r = 0; r < rows; ++r) {
                              const auto& a = ty[r];
                              const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
                              for (std::size_t c = 0; c < cols; ++c) {
                                const auto& b = tx[c];
                                const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
                                const T v = go[r * cols + c];
                                dst[a.i0 * w + b.i0] += v * wy0 * wx0;
                                dst[a.i0 * w + b.i1] += v * wy0 * wx1;
                                dst[a.i1 * w + b.i0] += v * wy1 * wx0;
                                dst[a.i1 * w + b.i1] += v * wy1 * wx1;
                              }
                            }
                          }
                        });
}

#define RSSSM_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> elementwise(Binary, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> elementwise(Binary, const Tensor<T>&, std::type_identity_t<T>);          \
  template Tensor<T> elementwise(Unary, const Tensor<T>&);                                    \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> gelu(const Tensor<T>&);                                                  \
  template Tensor<T> softplus(const Tensor<T>&);                                              \
  template Tensor<T> expm1_ratio(const Tensor<T>&);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> reduce(Reduce, const Tensor<T>&, int, bool);                             \
  template ArgReduceResult<T> max_with_index(const Tensor<T>&, int, bool);                    \
  template ArgReduceResult<T> min_with_index(const Tensor<T>&, int, bool);                    \
  template Tensor<T> sum_all(const Tensor<T>&);                                               \
  template Tensor<T> mean_all(const Tensor<T>&);                                              \
  template Tensor<T> softmax(const Tensor<T>&, int);                                          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                              \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                  \
  template Tensor<T> select(const Tensor<T>&, int, std::size_t);                              \
  template Tensor<T> pad2d(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::size_t, std::size_t);

RSSSM_INSTANTIATE_OPS(float)
RSSSM_INSTANTIATE_OPS(double)
RSSSM_INSTANTIATE_OPS(long double)

}  // namespace rsssm
