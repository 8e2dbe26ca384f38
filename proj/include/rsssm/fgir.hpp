#pragma once

#include <optional>

#include "rsssm/tensor.hpp"

namespace rsssm {

/// Axis along which the gate's value range is flipped. `Channels` reduces
/// over D per state dimension (default); `StateDims` reduces over Ds per
/// channel.
enum class InvertAxis { Channels, StateDims };

struct FgirConfig {
  double eps = kEps;
  InvertAxis axis = InvertAxis::Channels;
  /// Replaces the computed inverting weight with a constant (0 keeps A,
  /// 1 uses the fully inverted gate).
  std::optional<double> force_alpha;
};

/// Refined forgetting gate and the intermediates that produced it.
template <typename T>
struct RefinedGate {
  Tensor<T> a_refined;   // A^R [D x Ds]
  Tensor<T> a_inverted;  // A^I [D x Ds]
  Tensor<T> beta;        // [D]
  Tensor<T> alpha;       // [D]
  Tensor<T> spectrum_softmax;  // softmax of the batch-mean spectrum features [D]
};

/// A^I = A_max + A_min - A, extremes taken along `axis`.
template <typename T>
Tensor<T> invert_gate(const Tensor<T>& A, InvertAxis axis = InvertAxis::Channels);

/// beta_i = ||exp(A_i)|| / (max_j ||exp(A_j)|| + eps).
template <typename T>
Tensor<T> channel_importance(const Tensor<T>& A, double eps = kEps);

/// alpha = softmax(mean_rows(F)) * (1 - beta). `spectrum_softmax`, when
/// given, receives the softmax term.
template <typename T>
Tensor<T> inverting_weight(const Tensor<T>& features, const Tensor<T>& beta,
                           Tensor<T>* spectrum_softmax = nullptr);

/// A^R = (1 - alpha) * A + alpha * A^I, alpha broadcast over state dims.
template <typename T>
Tensor<T> refine_gate(const Tensor<T>& A, const Tensor<T>& A_inverted, const Tensor<T>& alpha);

/// Full refiner: A is the second path's gate, features the [N x D] batch of
/// spectrum features (may be undefined when force_alpha is set).
template <typename T>
RefinedGate<T> refine_forgetting_gate(const Tensor<T>& A, const Tensor<T>& features,
                                      const FgirConfig& config = {});

}  // namespace rsssm
