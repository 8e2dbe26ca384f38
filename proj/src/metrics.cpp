#include "rsssm/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rsssm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::int32_t ignore_index)
    : classes_(classes), ignore_(ignore_index), counts_(classes * classes, 0) {
  if (classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> label) {
  if (pred.size() != label.size()) {
    throw ShapeError("prediction has " + std::to_string(pred.size()) + " pixels, label has " +
                     std::to_string(label.size()));
  }
  const auto n = static_cast<std::int32_t>(classes_);
  for (std::size_t i = 0; i < label.size(); ++i) {
    const std::int32_t y = label[i];
    if (y == ignore_) continue;
    const std::int32_t p = pred[i];
    if (y < 0 || y >= n || p < 0 || p >= n) {
      throw std::out_of_range("class id out of range at pixel " + std::to_string(i) + ": label " +
                              std::to_string(y) + ", prediction " + std::to_string(p));
    }
    ++counts_[static_cast<std::size_t>(y) * classes_ + static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::vector<double> ConfusionMatrix::iou() const {
  std::vector<double> out(classes_, kNaN);
  for (std::size_t k = 0; k < classes_; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < classes_; ++j) {
      row += count(k, j);
      col += count(j, k);
    }
    const std::uint64_t tp = count(k, k);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) out[k] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double ConfusionMatrix::miou() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : iou()) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : kNaN;
}

double ConfusionMatrix::pixel_accuracy() const {
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < classes_; ++k) diag += count(k, k);
  const auto t = total();
  return t ? static_cast<double>(diag) / static_cast<double>(t) : kNaN;
}

std::vector<std::uint8_t> boundary_mask(std::span<const std::int32_t> labels, std::size_t height,
                                        std::size_t width) {
  if (labels.size() != height * width) {
    throw ShapeError("label map has " + std::to_string(labels.size()) + " pixels, expected " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<std::uint8_t> mask(labels.size(), 0);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t i = r * width + c;
      const std::int32_t v = labels[i];
      if (v == kIgnoreIndex) continue;
      auto differs = [&](std::size_t j) { return labels[j] != v && labels[j] != kIgnoreIndex; };
      if ((r > 0 && differs(i - width)) || (r + 1 < height && differs(i + width)) ||
          (c > 0 && differs(i - 1)) || (c + 1 < width && differs(i + 1))) {
        mask[i] = 1;
      }
    }
  }
  return mask;
}

namespace {

// Counts boundary pixels of `from` and how many lie within `tol` of one in `to`.
std::pair<std::uint64_t, std::uint64_t> match_boundaries(const std::vector<std::uint8_t>& from,
                                                         const std::vector<std::uint8_t>& to,
                                                         std::size_t height, std::size_t width, double tol) {
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(tol));
  const double tol2 = tol * tol;
  const auto H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);
  std::uint64_t total = 0, matched = 0;
  for (std::ptrdiff_t r = 0; r < H; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      if (!from[static_cast<std::size_t>(r * W + c)]) continue;
      ++total;
      bool hit = false;
      for (std::ptrdiff_t dr = -reach; dr <= reach && !hit; ++dr) {
        for (std::ptrdiff_t dc = -reach; dc <= reach && !hit; ++dc) {
          const std::ptrdiff_t rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          if (static_cast<double>(dr * dr + dc * dc) > tol2) continue;
          hit = to[static_cast<std::size_t>(rr * W + cc)] != 0;
        }
      }
      matched += hit;
    }
  }
  return {total, matched};
}

}  // namespace

void BoundaryScore::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> label,
                        std::size_t height, std::size_t width) {
  const auto pb = boundary_mask(pred, height, width);
  const auto lb = boundary_mask(label, height, width);
  const auto [pt, pm] = match_boundaries(pb, lb, height, width, tolerance_);
  const auto [lt, lm] = match_boundaries(lb, pb, height, width, tolerance_);
  pred_total_ += pt;
  pred_matched_ += pm;
  label_total_ += lt;
  label_matched_ += lm;
}

double BoundaryScore::precision() const {
  return pred_total_ ? static_cast<double>(pred_matched_) / static_cast<double>(pred_total_) : 0.0;
}

double BoundaryScore::recall() const {
  return label_total_ ? static_cast<double>(label_matched_) / static_cast<double>(label_total_) : 0.0;
}

double BoundaryScore::f_score() const {
  if (pred_total_ == 0 && label_total_ == 0) return kNaN;
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

template <typename T>
LabelTensor predict_labels(const Tensor<T>& logits) {
  if (logits.rank() != 4) throw ShapeError("predict_labels needs [N x K x H x W], got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  LabelTensor out{{n, logits.dim(2), logits.dim(3)}, std::vector<std::int32_t>(n * hw)};
  const auto x = logits.data();
  for (std::size_t b = 0; b < n; ++b) {
    const T* base = x.data() + b * k * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (base[c * hw + i] > base[best * hw + i]) best = c;
      }
      out.data[b * hw + i] = static_cast<std::int32_t>(best);
    }
  }
  return out;
}

template LabelTensor predict_labels(const Tensor<float>&);
template LabelTensor predict_labels(const Tensor<double>&);

}  // namespace rsssm
