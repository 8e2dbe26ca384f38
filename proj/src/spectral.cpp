#include "rsssm/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "rsssm/ops.hpp"

namespace rsssm {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

template <typename T>
std::vector<std::complex<T>> twiddles(std::size_t n) {
  std::vector<std::complex<T>> w(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    using Wide = std::conditional_t<std::is_same_v<T, float>, double, T>;
    const Wide angle = -2 * std::numbers::pi_v<Wide> * static_cast<Wide>(k) / static_cast<Wide>(n);
    w[k] = {static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle))};
  }
  return w;
}

// Strided in-place radix-2 transform using a precomputed table for length n.
template <typename T>
void fft_strided(std::complex<T>* a, std::size_t n, std::size_t stride,
                 const std::vector<std::complex<T>>& w) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i * stride], a[j * stride]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<T> u = a[(i + k) * stride];
        const std::complex<T> v = a[(i + k + half) * stride] * w[k * step];
        a[(i + k) * stride] = u + v;
        a[(i + k + half) * stride] = u - v;
      }
    }
  }
}

void require_power_of_two(std::size_t rows, std::size_t cols) {
  if (!is_power_of_two(rows) || !is_power_of_two(cols)) {
    throw ShapeError("fft2d needs power-of-two spatial dims, got " + std::to_string(rows) + "x" +
                     std::to_string(cols) + "; zero-pad to " +
                     std::to_string(next_power_of_two(rows)) + "x" +
                     std::to_string(next_power_of_two(cols)) + " (pad2d) first");
  }
}

}  // namespace

template <typename T>
void fft_inplace(std::span<std::complex<T>> data) {
  if (!is_power_of_two(data.size())) {
    throw ShapeError("fft length " + std::to_string(data.size()) + " is not a power of two");
  }
  fft_strided(data.data(), data.size(), 1, twiddles<T>(data.size()));
}

template <typename T>
void fft2d_inplace(std::span<std::complex<T>> plane, std::size_t rows, std::size_t cols) {
  require_power_of_two(rows, cols);
  const auto wr = twiddles<T>(cols);
  for (std::size_t r = 0; r < rows; ++r) fft_strided(plane.data() + r * cols, cols, 1, wr);
  const auto wc = twiddles<T>(rows);
  for (std::size_t c = 0; c < cols; ++c) fft_strided(plane.data() + c, rows, cols, wc);
}

template <typename T>
ComplexPlane<T> fft2d(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("fft2d needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(-2), cols = x.dim(-1);
  require_power_of_two(rows, cols);
  const std::size_t area = rows * cols;
  const std::size_t planes = x.numel() / area;
  const std::size_t hr = rows / 2, hc = cols / 2;
  const auto in = x.data();

  std::vector<T> out(2 * x.numel());
  std::vector<std::complex<T>> buf(area);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < area; ++i) buf[i] = {in[p * area + i], T(0)};
    fft2d_inplace<T>(buf, rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        // frequency (r, c) lands at the centered position
        const std::size_t dst = p * area + ((r + hr) % rows) * cols + (c + hc) % cols;
        out[dst] = buf[r * cols + c].real();
        out[x.numel() + dst] = buf[r * cols + c].imag();
      }
  }

  Shape stacked{2};
  stacked.insert(stacked.end(), x.shape().begin(), x.shape().end());
  auto both = make_result<T>(stacked, std::move(out), "fft2d", {x},
                             [rows, cols, planes, hr, hc](Node<T>& self) {
                               // d/dx of (Re X, Im X) contracted with (g_re, g_im) is
                               // Re(FFT(g_re - i g_im)).
                               const std::size_t area = rows * cols;
                               const std::size_t total = planes * area;
                               auto& gx = self.inputs[0]->grad_buffer();
                               std::vector<std::complex<T>> buf(area);
                               for (std::size_t p = 0; p < planes; ++p) {
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t c = 0; c < cols; ++c) {
                                     const std::size_t src =
                                         p * area + ((r + hr) % rows) * cols + (c + hc) % cols;
                                     buf[r * cols + c] = {self.grad[src], -self.grad[total + src]};
                                   }
                                 fft2d_inplace<T>(buf, rows, cols);
                                 for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += buf[i].real();
                               }
                             });
  return {select(both, 0, 0), select(both, 0, 1)};
}

template <typename T>
Tensor<T> magnitude(const ComplexPlane<T>& f, double eps) {
  if (f.re.shape() != f.im.shape()) {
    throw ShapeError("complex plane parts differ: " + shape_str(f.re.shape()) + " vs " +
                     shape_str(f.im.shape()));
  }
  const auto re = f.re.data();
  const auto im = f.im.data();
  std::vector<T> y(re.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sqrt(re[i] * re[i] + im[i] * im[i]);
  const T e = static_cast<T>(eps);
  return make_result<T>(f.re.shape(), std::move(y), "magnitude", {f.re, f.im}, [e](Node<T>& self) {
    auto& nr = *self.inputs[0];
    auto& ni = *self.inputs[1];
    for (int part = 0; part < 2; ++part) {
      auto& n = part == 0 ? nr : ni;
      if (!n.requires_grad) continue;
      auto& g = n.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * n.data[i] / (self.data[i] + e);
    }
  });
}

std::size_t BandPartition::occupancy(std::size_t band) const {
  std::size_t n = 0;
  for (auto m : masks.at(band)) n += m;
  return n;
}

template <typename T>
Tensor<T> BandPartition::mask_matrix() const {
  const std::size_t area = rows * cols;
  std::vector<T> m(area * bands, T(0));
  for (std::size_t i = 0; i < area; ++i)
    if (band_of[i] >= 0) m[i * bands + static_cast<std::size_t>(band_of[i])] = T(1);
  return Tensor<T>({area, bands}, std::move(m));
}

BandPartition build_band_partition(std::size_t rows, std::size_t cols, std::size_t bands) {
  if (bands < 2) throw std::invalid_argument("band count K must be >= 2, got " + std::to_string(bands));
  if (rows == 0 || cols == 0) throw std::invalid_argument("band partition needs a non-empty plane");
  BandPartition p;
  p.bands = bands;
  p.rows = rows;
  p.cols = cols;
  p.radius.resize(rows * cols);
  p.band_of.assign(rows * cols, -1);
  p.masks.assign(bands, std::vector<std::uint8_t>(rows * cols, 0));
  const double ch = static_cast<double>(rows / 2), cw = static_cast<double>(cols / 2);
  for (std::size_t h = 0; h < rows; ++h)
    for (std::size_t w = 0; w < cols; ++w) {
      const double dy = (static_cast<double>(h) - ch) / static_cast<double>(rows);
      const double dx = (static_cast<double>(w) - cw) / static_cast<double>(cols);
      const double r = std::sqrt(dy * dy + dx * dx);
      const std::size_t i = h * cols + w;
      p.radius[i] = r;
      for (std::size_t k = 0; k < bands; ++k) {
        const double lo = static_cast<double>(k) / static_cast<double>(bands);
        const double hi = static_cast<double>(k + 1) / static_cast<double>(bands);
        if (lo <= r && r < hi) {
          p.band_of[i] = static_cast<int>(k);
          p.masks[k][i] = 1;
          break;
        }
      }
    }
  return p;
}

template <typename T>
SpectrumFeatures<T> spectrum_features(const Tensor<T>& x, const BandPartition& partition,
                                      std::size_t high_bands, double eps) {
  if (x.rank() < 3) throw ShapeError("spectrum_features needs [..., D, H, W], got " + shape_str(x.shape()));
  const std::size_t K = partition.bands;
  if (high_bands < 1 || high_bands >= K) {
    throw std::invalid_argument("high-band count must satisfy 1 <= k_h < K (k_h=" +
                                std::to_string(high_bands) + ", K=" + std::to_string(K) + ")");
  }
  const std::size_t rows = next_power_of_two(x.dim(-2));
  const std::size_t cols = next_power_of_two(x.dim(-1));
  if (partition.rows != rows || partition.cols != cols) {
    throw ShapeError("band partition is " + std::to_string(partition.rows) + "x" +
                     std::to_string(partition.cols) + " but the padded spectrum is " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  const Tensor<T> padded = pad2d(x, rows, cols);
  const Tensor<T> mag = magnitude(fft2d(padded), eps);

  Shape lead(x.shape().begin(), x.shape().end() - 2);  // [..., D]
  const std::size_t channels = numel(lead);
  const Tensor<T> energy = matmul(reshape(mag, {channels, rows * cols}), partition.mask_matrix<T>());
  const Tensor<T> total = sum(energy, 1, true);
  const Tensor<T> dist = energy / (total + static_cast<T>(eps));
  const Tensor<T> F = sum(slice(dist, 1, K - high_bands, K), 1);

  Shape dist_shape = lead;
  dist_shape.push_back(K);
  return {reshape(F, lead), reshape(dist, dist_shape), K, high_bands};
}

template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& features, double eps) {
  if (features.rank() != 2) {
    throw ShapeError("similarity_matrix needs [N x D], got " + shape_str(features.shape()));
  }
  const Tensor<T> unit = features / (l2_norm(features, 1, true) + static_cast<T>(eps));
  return matmul(unit, transpose(unit));
}

template <typename T>
Tensor<T> channel_info_loss(const Tensor<T>& features, double eps) {
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw ShapeError("channel_info_loss needs a non-empty [N x D] batch, got " +
                     shape_str(features.shape()));
  }
  return T(1) - mean_all(similarity_matrix(features, eps));
}

#define RSSSM_INSTANTIATE_SPECTRAL(T)                                                          \
  template void fft_inplace(std::span<std::complex<T>>);                                       \
  template void fft2d_inplace(std::span<std::complex<T>>, std::size_t, std::size_t);           \
  template ComplexPlane<T> fft2d(const Tensor<T>&);                                            \
  template Tensor<T> magnitude(const ComplexPlane<T>&, double);                                \
  template Tensor<T> BandPartition::mask_matrix<T>() const;                                    \
  template SpectrumFeatures<T> spectrum_features(const Tensor<T>&, const BandPartition&,       \
                                                 std::size_t, double);                         \
  template Tensor<T> similarity_matrix(const Tensor<T>&, double);                              \
  template Tensor<T> channel_info_loss(const Tensor<T>&, double);

RSSSM_INSTANTIATE_SPECTRAL(float)
RSSSM_INSTANTIATE_SPECTRAL(double)
RSSSM_INSTANTIATE_SPECTRAL(long double)

}  // namespace rsssm
