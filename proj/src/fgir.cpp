#include "rsssm/fgir.hpp"

#include <iostream>

#include "rsssm/ops.hpp"

namespace rsssm {

template <typename T>
Tensor<T> invert_gate(const Tensor<T>& A, InvertAxis axis) {
  if (A.rank() != 2) throw ShapeError("invert_gate needs A [D x Ds], got " + shape_str(A.shape()));
  const int reduce_axis = axis == InvertAxis::Channels ? 0 : 1;
  if (A.dim(reduce_axis) == 1) {
    std::clog << "fgir: single entry along the inversion axis, A^I == A\n";
  }
  return max(A, reduce_axis, true) + min(A, reduce_axis, true) - A;
}

template <typename T>
Tensor<T> channel_importance(const Tensor<T>& A, double eps) {
  if (A.rank() != 2) throw ShapeError("channel_importance needs A [D x Ds], got " + shape_str(A.shape()));
  const Tensor<T> norms = l2_norm(exp(A), 1);
  return norms / (max(norms, 0, true) + static_cast<T>(eps));
}

template <typename T>
Tensor<T> inverting_weight(const Tensor<T>& features, const Tensor<T>& beta, Tensor<T>* spectrum_softmax) {
  if (features.rank() != 2 || beta.rank() != 1 || features.dim(1) != beta.dim(0)) {
    throw ShapeError("inverting_weight needs F [N x D] and beta [D], got " +
                     shape_str(features.shape()) + " and " + shape_str(beta.shape()));
  }
  const Tensor<T> soft = softmax(mean(features, 0), 0);
  if (spectrum_softmax) *spectrum_softmax = soft;
  return soft * (T(1) - beta);
}

template <typename T>
Tensor<T> refine_gate(const Tensor<T>& A, const Tensor<T>& A_inverted, const Tensor<T>& alpha) {
  if (A.shape() != A_inverted.shape() || alpha.rank() != 1 || alpha.dim(0) != A.dim(0)) {
    throw ShapeError("refine_gate needs A, A^I [D x Ds] and alpha [D], got " + shape_str(A.shape()) +
                     ", " + shape_str(A_inverted.shape()) + ", " + shape_str(alpha.shape()));
  }
  const Tensor<T> w = reshape(alpha, {alpha.dim(0), 1});
  return (T(1) - w) * A + w * A_inverted;
}

template <typename T>
RefinedGate<T> refine_forgetting_gate(const Tensor<T>& A, const Tensor<T>& features, const FgirConfig& config) {
  RefinedGate<T> out;
  out.a_inverted = invert_gate(A, config.axis);
  out.beta = channel_importance(A, config.eps);
  if (config.force_alpha) {
    out.alpha = Tensor<T>::full({A.dim(0)}, static_cast<T>(*config.force_alpha));
  } else {
    out.alpha = inverting_weight(features, out.beta, &out.spectrum_softmax);
  }
  out.a_refined = refine_gate(A, out.a_inverted, out.alpha);
  return out;
}

#define RSSSM_INSTANTIATE_FGIR(T)                                                          \
  template Tensor<T> invert_gate(const Tensor<T>&, InvertAxis);                            \
  template Tensor<T> channel_importance(const Tensor<T>&, double);                         \
  template Tensor<T> inverting_weight(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);     \
  template Tensor<T> refine_gate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template RefinedGate<T> refine_forgetting_gate(const Tensor<T>&, const Tensor<T>&,       \
                                                 const FgirConfig&);

RSSSM_INSTANTIATE_FGIR(float)
RSSSM_INSTANTIATE_FGIR(double)
RSSSM_INSTANTIATE_FGIR(long double)

}  // namespace rsssm
