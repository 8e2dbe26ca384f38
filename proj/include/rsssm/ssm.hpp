#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>

#include "rsssm/tensor.hpp"

namespace rsssm {

/// Per-channel diagonal SSM parameters. A and the time step are stored
/// through unconstrained leaves so A < 0 and delta > 0 always hold:
/// A = -exp(a_log), delta = softplus(dt_raw).
template <typename T>
struct SsmParams {
  Tensor<T> a_log;   // [D x Ds]
  Tensor<T> b;       // [D x Ds]
  Tensor<T> c;       // [D x Ds]
  Tensor<T> dt_raw;  // [D]

  std::size_t channels() const { return b.dim(0); }
  std::size_t state_dim() const { return b.dim(1); }

  Tensor<T> A() const;      // [D x Ds], strictly negative
  Tensor<T> delta() const;  // [D], strictly positive

  /// Random init: a_log uniform in [ln 0.5, ln 8], B and C normal with
  /// std 1/sqrt(Ds), delta log-uniform in [1e-3, 1e-1].
  static SsmParams init(std::size_t channels, std::size_t state_dim, std::mt19937_64& rng);
};

/// Zero-order-hold gates: a_bar in (0, 1) forgets, b_bar scales new input.
template <typename T>
struct DiscreteGates {
  Tensor<T> a_bar;  // [D x Ds]
  Tensor<T> b_bar;  // [D x Ds]
};

/// Hidden state after consuming `position` tokens. h is [batch x D x Ds].
template <typename T>
struct ScanState {
  Tensor<T> h;
  std::size_t position = 0;
};

/// a_bar = exp(delta*A), b_bar = (delta*A)^-1 (exp(delta*A) - 1) (delta*B).
/// `gate_override` replaces A (the refined gate fed to the first path) and
/// must be strictly negative.
template <typename T>
DiscreteGates<T> discretize(const SsmParams<T>& params,
                            const std::optional<Tensor<T>>& gate_override = std::nullopt);

/// Same formula from explicit A [D x Ds], delta [D], B [D x Ds].
template <typename T>
DiscreteGates<T> discretize(const Tensor<T>& A, const Tensor<T>& delta, const Tensor<T>& B);

/// [T x D x Hs x Ws] -> [T*Hs*Ws x D]: frames in temporal order, raster
/// (row-major) order inside each frame.
template <typename T>
Tensor<T> flatten_tokens(const Tensor<T>& maps);

/// Inverse of flatten_tokens.
template <typename T>
Tensor<T> unflatten_tokens(const Tensor<T>& tokens, std::size_t frames, std::size_t rows,
                           std::size_t cols);

template <typename T>
struct ScanResult {
  Tensor<T> y;  // same shape as x
  ScanState<T> final_state;
};

/// Runs h_t = a_bar * h_{t-1} + b_bar * x_t, y_t = C^T h_t per channel over
/// x [L x D] or [batch x L x D]. The initial state defaults to zeros and is
/// treated as a constant. Backward is an adjoint (reverse) recurrence that
/// recomputes states from sqrt(L)-spaced checkpoints.
template <typename T>
ScanResult<T> scan(const DiscreteGates<T>& gates, const Tensor<T>& C, const Tensor<T>& x,
                   const std::optional<ScanState<T>>& h0 = std::nullopt);

namespace detail {

/// Forward kernel on raw buffers for one sequence. `h` holds the initial
/// state on entry and the final state on return. When `checkpoints` is
/// non-null, the state before token k*interval is written at slot k.
template <typename T>
void scan_forward(std::size_t length, std::size_t channels, std::size_t state_dim,
                  const T* a_bar, const T* b_bar, const T* c, const T* x, T* y, T* h,
                  T* checkpoints, std::size_t interval);

/// Adjoint kernel for one sequence; accumulates into the gradient buffers.
template <typename T>
void scan_backward(std::size_t length, std::size_t channels, std::size_t state_dim,
                   const T* a_bar, const T* b_bar, const T* c, const T* x, const T* dy,
                   const T* checkpoints, std::size_t interval, T* d_a_bar, T* d_b_bar, T* d_c,
                   T* dx);

std::size_t checkpoint_interval(std::size_t length);

}  // namespace detail

}  // namespace rsssm
