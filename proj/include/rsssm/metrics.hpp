#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsssm/labels.hpp"
#include "rsssm/tensor.hpp"

namespace rsssm {

/// Accumulated confusion matrix; rows are labels, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes, std::int32_t ignore_index = kIgnoreIndex);

  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> label);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t count(std::size_t label, std::size_t pred) const { return counts_[label * classes_ + pred]; }
  std::uint64_t total() const;

  /// TP / (TP + FP + FN); NaN for a class absent from both pred and label.
  std::vector<double> iou() const;
  /// Mean over classes with a defined IoU; NaN when none is defined.
  double miou() const;
  double pixel_accuracy() const;

 private:
  std::size_t classes_;
  std::int32_t ignore_;
  std::vector<std::uint64_t> counts_;
};

/// Boundary precision/recall with a distance tolerance, accumulated over a
/// set of label maps. A boundary pixel is one whose 4-neighbour carries a
/// different label.
class BoundaryScore {
 public:
  explicit BoundaryScore(double tolerance = 2.0) : tolerance_(tolerance) {}

  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> label, std::size_t height,
           std::size_t width);

  double precision() const;
  double recall() const;
  /// Harmonic mean; NaN when neither side has any boundary pixel.
  double f_score() const;

 private:
  double tolerance_;
  std::uint64_t pred_total_ = 0, pred_matched_ = 0;
  std::uint64_t label_total_ = 0, label_matched_ = 0;
};

/// Boundary mask of a single H x W label map.
std::vector<std::uint8_t> boundary_mask(std::span<const std::int32_t> labels, std::size_t height,
                                        std::size_t width);

/// Per-pixel argmax over the class axis of logits [N x K x H x W].
template <typename T>
LabelTensor predict_labels(const Tensor<T>& logits);

}  // namespace rsssm
