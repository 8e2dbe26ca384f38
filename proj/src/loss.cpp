#include "rsssm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "rsssm/ops.hpp"

namespace rsssm {

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !(lambda_i >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative (lambda=" + std::to_string(lambda) +
                                ", lambda_i=" + std::to_string(lambda_i) + ")");
  }
}

template <typename T>
Tensor<T> cross_entropy_per_image(const Tensor<T>& logits, const LabelTensor& labels, std::int32_t ignore_index) {
  if (logits.rank() != 4) throw ShapeError("cross_entropy needs logits [N x K x H x W], got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  const Shape want{n, logits.dim(2), logits.dim(3)};
  if (labels.shape != want) {
    throw ShapeError("labels " + shape_str(labels.shape) + " do not match logits " + shape_str(logits.shape()));
  }
  const auto kk = static_cast<std::int32_t>(k);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const auto y = labels.data[i];
    if (y != ignore_index && (y < 0 || y >= kk)) {
      throw std::out_of_range("label " + std::to_string(y) + " at index " + std::to_string(i) +
                              " outside [0, " + std::to_string(k) + ")");
    }
  }

  const auto x = logits.data();
  std::vector<T> loss(n, T(0));
  std::vector<std::size_t> valid(n, 0);
  for (std::size_t b = 0; b < n; ++b) {
    const T* base = x.data() + b * k * hw;
    // float logits accumulate in double; wider types in themselves.
    using Acc = std::conditional_t<std::is_same_v<T, float>, double, T>;
    Acc acc = 0;
    for (std::size_t i = 0; i < hw; ++i) {
      const auto y = labels.data[b * hw + i];
      if (y == ignore_index) continue;
      T peak = base[i];
      for (std::size_t c = 1; c < k; ++c) peak = std::max(peak, base[c * hw + i]);
      T z = T(0);
      for (std::size_t c = 0; c < k; ++c) z += std::exp(base[c * hw + i] - peak);
      acc += static_cast<Acc>(std::log(z) + peak - base[static_cast<std::size_t>(y) * hw + i]);
      ++valid[b];
    }
    loss[b] = valid[b] ? static_cast<T>(acc / static_cast<Acc>(valid[b])) : T(0);
  }

  auto label_copy = std::make_shared<const std::vector<std::int32_t>>(labels.data);
  return make_result<T>({n}, std::move(loss), "cross_entropy", {logits},
                        [=](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          std::vector<T> dx(in.data.size(), T(0));
                          for (std::size_t b = 0; b < n; ++b) {
                            if (!valid[b]) continue;
                            const T g = self.grad[b] / static_cast<T>(valid[b]);
                            const T* base = in.data.data() + b * k * hw;
                            T* out = dx.data() + b * k * hw;
                            for (std::size_t i = 0; i < hw; ++i) {
                              const auto y = (*label_copy)[b * hw + i];
                              if (y == ignore_index) continue;
                              T peak = base[i];
                              for (std::size_t c = 1; c < k; ++c) peak = std::max(peak, base[c * hw + i]);
                              T z = T(0);
                              for (std::size_t c = 0; c < k; ++c) z += std::exp(base[c * hw + i] - peak);
                              for (std::size_t c = 0; c < k; ++c) {
                                out[c * hw + i] = g * std::exp(base[c * hw + i] - peak) / z;
                              }
                              out[static_cast<std::size_t>(y) * hw + i] -= g;
                            }
                          }
                          accumulate<T>(in, dx);
                        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelTensor& labels, std::int32_t ignore_index) {
  if (logits.rank() != 3) throw ShapeError("cross_entropy needs logits [K x H x W], got " + shape_str(logits.shape()));
  Shape batched{1};
  batched.insert(batched.end(), labels.shape.begin(), labels.shape.end());
  const LabelTensor one{batched, labels.data};
  const Shape s = logits.shape();
  return reshape(cross_entropy_per_image(reshape(logits, {1, s[0], s[1], s[2]}), one, ignore_index), Shape{});
}

template <typename T>
LossTerms<T> total_loss(const Tensor<T>& logits, const LabelTensor& labels, std::size_t clips, const Tensor<T>& ci,
                        const LossConfig& config, std::int32_t ignore_index) {
  config.validate();
  if (clips == 0 || logits.rank() != 4 || logits.dim(0) % clips != 0) {
    throw ShapeError("total_loss: " + shape_str(logits.shape()) + " logits cannot be split into " +
                     std::to_string(clips) + " clips");
  }
  const std::size_t frames = logits.dim(0) / clips;
  const Tensor<T> per_frame = reshape(cross_entropy_per_image(logits, labels, ignore_index), {clips, frames});
  LossTerms<T> out;
  out.ce_last = mean_all(slice(per_frame, 1, frames - 1, frames));
  out.ce_sum = mean_all(sum(per_frame, 1));
  out.ci = ci.defined() ? reshape(ci, Shape{}) : Tensor<T>::scalar(T(0));
  out.total = out.ce_last + static_cast<T>(config.lambda) * out.ce_sum + static_cast<T>(config.lambda_i) * out.ci;
  return out;
}

#define RSSSM_INSTANTIATE_LOSS(T)                                                                      \
  template Tensor<T> cross_entropy_per_image(const Tensor<T>&, const LabelTensor&, std::int32_t);      \
  template Tensor<T> cross_entropy(const Tensor<T>&, const LabelTensor&, std::int32_t);                \
  template LossTerms<T> total_loss(const Tensor<T>&, const LabelTensor&, std::size_t, const Tensor<T>&, \
                                   const LossConfig&, std::int32_t);

RSSSM_INSTANTIATE_LOSS(float)
RSSSM_INSTANTIATE_LOSS(double)
RSSSM_INSTANTIATE_LOSS(long double)

}  // namespace rsssm
