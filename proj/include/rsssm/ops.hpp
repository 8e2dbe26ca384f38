#pragma once

#include <cstddef>
#include <type_traits>
#include <vector>

#include "rsssm/tensor.hpp"

namespace rsssm {

enum class Binary { Add, Sub, Mul, Div };
enum class Unary { Exp, Log, Sqrt, Neg, Reciprocal };
enum class Reduce { Sum, Mean, Max, Min, L2 };

/// Result shape of combining `a` and `b` under trailing-dimension
/// broadcasting (shorter shapes are left-padded with 1s; each aligned pair
/// must match or contain a 1). Throws ShapeError naming both shapes.
Shape broadcast_shape(const Shape& a, const Shape& b);

// Elementwise arithmetic with broadcasting.
template <typename T> Tensor<T> elementwise(Binary op, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> elementwise(Binary op, const Tensor<T>& a, std::type_identity_t<T> b);
template <typename T> Tensor<T> elementwise(Unary op, const Tensor<T>& a);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(Binary::Add, a, b); }
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(Binary::Sub, a, b); }
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(Binary::Mul, a, b); }
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(Binary::Div, a, b); }
template <typename T> Tensor<T> exp(const Tensor<T>& a) { return elementwise(Unary::Exp, a); }
template <typename T> Tensor<T> log(const Tensor<T>& a) { return elementwise(Unary::Log, a); }
template <typename T> Tensor<T> sqrt(const Tensor<T>& a) { return elementwise(Unary::Sqrt, a); }
template <typename T> Tensor<T> neg(const Tensor<T>& a) { return elementwise(Unary::Neg, a); }
template <typename T> Tensor<T> reciprocal(const Tensor<T>& a) { return elementwise(Unary::Reciprocal, a); }

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }
template <typename T> Tensor<T> operator+(const Tensor<T>& a, std::type_identity_t<T> s) { return elementwise(Binary::Add, a, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, std::type_identity_t<T> s) { return elementwise(Binary::Sub, a, s); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, std::type_identity_t<T> s) { return elementwise(Binary::Mul, a, s); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, std::type_identity_t<T> s) { return elementwise(Binary::Div, a, s); }
template <typename T> Tensor<T> operator+(std::type_identity_t<T> s, const Tensor<T>& a) { return a + s; }
template <typename T> Tensor<T> operator*(std::type_identity_t<T> s, const Tensor<T>& a) { return a * s; }
template <typename T> Tensor<T> operator-(std::type_identity_t<T> s, const Tensor<T>& a) { return neg(a) + s; }

template <typename T> Tensor<T> square(const Tensor<T>& a);
/// Exact GELU, x * Phi(x).
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
/// log(1 + e^x), overflow-safe.
template <typename T> Tensor<T> softplus(const Tensor<T>& a);
/// (e^x - 1) / x with the removable singularity at 0 filled in; keeps the
/// zero-order-hold input gate accurate as the time step shrinks.
template <typename T> Tensor<T> expm1_ratio(const Tensor<T>& a);

/// [m x k] * [k x n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// 2-D transpose.
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
struct ArgReduceResult {
  Tensor<T> values;
  std::vector<std::size_t> indices;  // position along the reduced axis
};

template <typename T> Tensor<T> reduce(Reduce op, const Tensor<T>& a, int axis, bool keepdim = false);
template <typename T> ArgReduceResult<T> max_with_index(const Tensor<T>& a, int axis, bool keepdim = false);
template <typename T> ArgReduceResult<T> min_with_index(const Tensor<T>& a, int axis, bool keepdim = false);
template <typename T> Tensor<T> sum(const Tensor<T>& a, int axis, bool keepdim = false) { return reduce(Reduce::Sum, a, axis, keepdim); }
template <typename T> Tensor<T> mean(const Tensor<T>& a, int axis, bool keepdim = false) { return reduce(Reduce::Mean, a, axis, keepdim); }
template <typename T> Tensor<T> max(const Tensor<T>& a, int axis, bool keepdim = false) { return reduce(Reduce::Max, a, axis, keepdim); }
template <typename T> Tensor<T> min(const Tensor<T>& a, int axis, bool keepdim = false) { return reduce(Reduce::Min, a, axis, keepdim); }
template <typename T> Tensor<T> l2_norm(const Tensor<T>& a, int axis, bool keepdim = false) { return reduce(Reduce::L2, a, axis, keepdim); }
template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);

/// Max-shifted softmax along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& a, int axis);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& perm);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// Half-open range [begin, end) along `axis`.
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t begin, std::size_t end);
/// Drops `axis`, keeping entry `index`.
template <typename T> Tensor<T> select(const Tensor<T>& a, int axis, std::size_t index);

/// Zero-pads the last two axes at the bottom/right up to (rows, cols).
template <typename T> Tensor<T> pad2d(const Tensor<T>& a, std::size_t rows, std::size_t cols);

/// Normalizes over the last axis, then applies gain and bias of that size.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps = 1e-5);

/// Bilinear resize of the last two axes (half-pixel centers, edge clamped).
template <typename T> Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t rows, std::size_t cols);

}  // namespace rsssm
