#pragma once

#include <cstddef>
#include <cstdint>

#include "rsssm/labels.hpp"
#include "rsssm/tensor.hpp"

namespace rsssm {

struct LossConfig {
  double lambda = 0.5;    // weight on the per-frame CE sum
  double lambda_i = 0.1;  // weight on the channel-information loss

  void validate() const;
};

/// Mean pixel cross-entropy of each image: logits [N x K x H x W], labels
/// [N x H x W] -> [N]. An image whose pixels are all ignored contributes 0.
template <typename T>
Tensor<T> cross_entropy_per_image(const Tensor<T>& logits, const LabelTensor& labels,
                                  std::int32_t ignore_index = kIgnoreIndex);

/// Single image: logits [K x H x W], labels [H x W] -> scalar.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelTensor& labels,
                        std::int32_t ignore_index = kIgnoreIndex);

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> ce_last;  // CE of the final frame, clip mean
  Tensor<T> ce_sum;   // sum of per-frame CE including the final frame, clip mean
  Tensor<T> ci;
};

/// total = ce(last) + lambda * sum_t ce(t) + lambda_i * ci per clip, averaged
/// over clips. The final frame is counted both standalone and in the sum.
/// logits [clips*frames x K x H x W] clip-major; `ci` is a scalar already
/// averaged across layers.
template <typename T>
LossTerms<T> total_loss(const Tensor<T>& logits, const LabelTensor& labels, std::size_t clips,
                        const Tensor<T>& ci, const LossConfig& config,
                        std::int32_t ignore_index = kIgnoreIndex);

}  // namespace rsssm
