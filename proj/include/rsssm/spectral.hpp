#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsssm/tensor.hpp"

namespace rsssm {

/// Real and imaginary planes of a centered 2-D spectrum, same shape each.
template <typename T>
struct ComplexPlane {
  Tensor<T> re;
  Tensor<T> im;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 DFT (unnormalized, e^{-i...} kernel) of a
/// power-of-two-length sequence.
template <typename T>
void fft_inplace(std::span<std::complex<T>> data);

/// Row FFTs then column FFTs over a row-major rows x cols plane.
template <typename T>
void fft2d_inplace(std::span<std::complex<T>> plane, std::size_t rows, std::size_t cols);

/// Unnormalized forward 2-D DFT over the last two axes of `x`, with the zero
/// frequency shifted to (rows/2, cols/2). Both axes must be powers of two.
template <typename T>
ComplexPlane<T> fft2d(const Tensor<T>& x);

/// |z|. The backward rule divides by |z| + eps so a zero bin has zero
/// gradient.
template <typename T>
Tensor<T> magnitude(const ComplexPlane<T>& f, double eps = kEps);

/// Radial partition of a centered rows x cols spectrum into K half-open
/// bands k/K <= R < (k+1)/K, R being the normalized distance from the
/// center. R never exceeds sqrt(0.5), so bands starting at or above that are
/// empty.
struct BandPartition {
  std::size_t bands = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> radius;                   // rows*cols
  std::vector<int> band_of;                     // rows*cols, -1 if R >= 1
  std::vector<std::vector<std::uint8_t>> masks;  // bands x (rows*cols)

  std::size_t occupancy(std::size_t band) const;
  /// [rows*cols x bands] 0/1 matrix; column k is mask k.
  template <typename T>
  Tensor<T> mask_matrix() const;
};

BandPartition build_band_partition(std::size_t rows, std::size_t cols, std::size_t bands);

template <typename T>
struct SpectrumFeatures {
  Tensor<T> F;             // [..., D], high-band energy ratio per channel
  Tensor<T> distribution;  // [..., D, K], normalized band energies
  std::size_t bands = 0;
  std::size_t high_bands = 0;
};

/// Per-channel spectrum features of x [..., D, H, W]. Spatial axes that are
/// not powers of two are zero-padded at the bottom/right first; `partition`
/// must match the padded size.
template <typename T>
SpectrumFeatures<T> spectrum_features(const Tensor<T>& x, const BandPartition& partition,
                                      std::size_t high_bands, double eps = kEps);

/// Cosine similarity between rows of F [N x D]; rows normalized by
/// (norm + eps).
template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& features, double eps = kEps);

/// 1 - mean of the similarity matrix over all N^2 ordered pairs, diagonal
/// included.
template <typename T>
Tensor<T> channel_info_loss(const Tensor<T>& features, double eps = kEps);

}  // namespace rsssm
