#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsssm/checkpoint.hpp"
#include "rsssm/fgir.hpp"
#include "rsssm/spectral.hpp"
#include "rsssm/ssm.hpp"
#include "rsssm/tensor.hpp"

namespace rsssm {

/// Ablation variants. VSsm: one vanilla path. BiVSsm: two independent
/// vanilla paths. NoCwap: dual path whose first path runs the plainly
/// inverted gate. RsSsm: spectrum-weighted refined gate.
enum class Variant { VSsm, BiVSsm, NoCwap, RsSsm };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view tag);
inline constexpr Variant kAllVariants[] = {Variant::VSsm, Variant::BiVSsm, Variant::NoCwap,
                                           Variant::RsSsm};

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t embed_dim = 64;
  std::size_t state_dim = 8;
  std::size_t bands = 8;       // K
  std::size_t high_bands = 3;  // k_h
  std::size_t patch = 4;
  std::size_t in_channels = 3;
  std::size_t classes = 4;
  Variant variant = Variant::RsSsm;
  bool detach_spectrum = false;
  FgirConfig fgir;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// One dual-path layer. Both paths read the same projected features; the
/// first path's gate comes from the refiner in the RS-SSM and No-CwAP
/// variants. The single-path variant only populates theta2.
template <typename T>
struct DualPathLayer {
  Tensor<T> norm_gain, norm_bias;
  Tensor<T> proj_w, proj_b;  // shared projection [C x D], [D]
  SsmParams<T> theta1;
  SsmParams<T> theta2;
  Tensor<T> fuse_w1, fuse_b1;  // [P*D x 2D], [2D]
  Tensor<T> fuse_w2, fuse_b2;  // [2D x D], [D]
};

/// Token layout: clips x frames x rows x cols tokens, clip-major.
struct TokenGrid {
  std::size_t clips = 1;
  std::size_t frames = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t tokens() const { return clips * frames * rows * cols; }
  std::size_t sequence() const { return frames * rows * cols; }
};

template <typename T>
struct LayerTrace {
  Tensor<T> out;        // [N x D]
  Tensor<T> projected;  // [N x D], shared input of both paths
  Tensor<T> path1;      // [N x D]; undefined for the single-path variant
  Tensor<T> path2;      // [N x D]
  std::optional<SpectrumFeatures<T>> spectrum;
  Tensor<T> loss_ci;  // scalar; undefined without spectrum features
  std::optional<RefinedGate<T>> gate;
  std::optional<DiscreteGates<T>> gates1;
  DiscreteGates<T> gates2;
};

/// Scan states carried from one clip into the next during streaming
/// evaluation; empty slots start from zero.
template <typename T>
struct LayerCarry {
  std::optional<ScanState<T>> path1, path2;
};

template <typename T>
using StreamState = std::vector<LayerCarry<T>>;

/// With `carry`, both scans start from its states and leave their final
/// states there.
template <typename T>
LayerTrace<T> layer_forward(const DualPathLayer<T>& layer, const ModelConfig& config,
                            const Tensor<T>& tokens, const TokenGrid& grid,
                            const BandPartition& partition, LayerCarry<T>* carry = nullptr);

/// Map-layout convenience: M_in [T x C x Hs x Ws] -> [T x D x Hs x Ws].
template <typename T>
Tensor<T> layer_forward(const DualPathLayer<T>& layer, const ModelConfig& config, const Tensor<T>& maps);

template <typename T>
struct ModelOutput {
  Tensor<T> logits;   // [clips*frames x classes x H x W]
  Tensor<T> loss_ci;  // scalar, mean over layers; zero when no layer has CwAP
  std::vector<LayerTrace<T>> layers;
};

template <typename T>
class RsssmModel {
 public:
  static RsssmModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<DualPathLayer<T>>& layers() { return layers_; }
  const std::vector<DualPathLayer<T>>& layers() const { return layers_; }

  /// Every trainable tensor in a stable order, with its checkpoint name.
  std::vector<NamedTensor<T>> parameters() const;
  std::size_t parameter_count() const;

  /// frames: [clips*frames x C x H x W], clip-major. With `carry`, every
  /// layer's scans resume from the states left by the previous call.
  ModelOutput<T> forward(const Tensor<T>& frames, std::size_t clips = 1, StreamState<T>* carry = nullptr) const;

  std::vector<CheckpointEntry> to_checkpoint() const;
  /// Copies values from a checkpoint; names and shapes must match.
  void load_checkpoint(const std::vector<CheckpointEntry>& entries);

 private:
  ModelConfig config_;
  Tensor<T> embed_w_, embed_b_, embed_gain_, embed_bias_;
  std::vector<DualPathLayer<T>> layers_;
  Tensor<T> head_gain_, head_bias_, head_w_, head_b_;
};

/// Logits [T x classes x H x W] for one clip [T x 3 x H x W].
template <typename T>
Tensor<T> model_forward(const RsssmModel<T>& model, const Tensor<T>& clip);

template <typename T>
RsssmModel<T> build_ablation_variant(Variant variant, ModelConfig config, std::uint64_t seed);

}  // namespace rsssm
