#include "rsssm/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <stdexcept>

#include "rsssm/ops.hpp"

namespace rsssm {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::VSsm: return "V-SSM";
    case Variant::BiVSsm: return "Bi-V-SSM";
    case Variant::NoCwap: return "No-CwAP";
    case Variant::RsSsm: return "RS-SSM";
  }
  return "?";
}

Variant parse_variant(std::string_view tag) {
  std::string lower(tag);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Variant v : kAllVariants) {
    std::string name(variant_name(v));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return v;
  }
  throw std::invalid_argument("unknown variant tag '" + std::string(tag) +
                              "' (expected V-SSM, Bi-V-SSM, No-CwAP or RS-SSM)");
}

namespace {

bool single_path(Variant v) { return v == Variant::VSsm; }

template <typename T>
Tensor<T> gaussian(const Shape& shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> v(numel(shape));
  for (auto& e : v) e = static_cast<T>(dist(rng));
  return Tensor<T>(shape, std::move(v), true);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return matmul(x, w) + b;
}

}  // namespace

template <typename T>
LayerTrace<T> layer_forward(const DualPathLayer<T>& layer, const ModelConfig& config,
                            const Tensor<T>& tokens, const TokenGrid& grid,
                            const BandPartition& partition, LayerCarry<T>* carry) {
  if (tokens.rank() != 2 || tokens.dim(0) != grid.tokens()) {
    throw ShapeError("layer_forward: tokens " + shape_str(tokens.shape()) + " do not match a grid of " +
                     std::to_string(grid.tokens()) + " tokens");
  }
  const std::size_t D = layer.proj_w.dim(1);
  LayerTrace<T> trace;
  const Tensor<T> normed = layer_norm(tokens, layer.norm_gain, layer.norm_bias);
  trace.projected = linear(normed, layer.proj_w, layer.proj_b);
  const Tensor<T> seq = reshape(trace.projected, {grid.clips, grid.sequence(), D});

  const Variant v = config.variant;
  trace.gates2 = discretize(layer.theta2);
  if (v == Variant::RsSsm) {
    const Tensor<T> maps = permute(reshape(trace.projected, {grid.clips * grid.frames, grid.rows, grid.cols, D}),
                                   {0, 3, 1, 2});
    auto spec = spectrum_features(maps, partition, config.high_bands, config.fgir.eps);
    if (config.detach_spectrum) spec.F = spec.F.detach();
    trace.loss_ci = channel_info_loss(spec.F, config.fgir.eps);
    trace.gate = refine_forgetting_gate(layer.theta2.A(), spec.F, config.fgir);
    trace.spectrum = std::move(spec);
    trace.gates1 = discretize(layer.theta1, std::optional<Tensor<T>>(trace.gate->a_refined));
  } else if (v == Variant::NoCwap) {
    FgirConfig plain = config.fgir;
    plain.force_alpha = 1.0;
    trace.gate = refine_forgetting_gate(layer.theta2.A(), Tensor<T>(), plain);
    trace.gates1 = discretize(layer.theta1, std::optional<Tensor<T>>(trace.gate->a_refined));
  } else if (v == Variant::BiVSsm) {
    trace.gates1 = discretize(layer.theta1);
  }

  auto run = [&](const DiscreteGates<T>& gates, const Tensor<T>& C, std::optional<ScanState<T>>* state) {
    auto result = scan(gates, C, seq, state ? *state : std::nullopt);
    if (state) *state = std::move(result.final_state);
    return reshape(result.y, {grid.tokens(), D});
  };
  trace.path2 = run(trace.gates2, layer.theta2.c, carry ? &carry->path2 : nullptr);
  Tensor<T> fused_in = trace.path2;
  if (trace.gates1) {
    trace.path1 = run(*trace.gates1, layer.theta1.c, carry ? &carry->path1 : nullptr);
    fused_in = concat<T>({trace.path1, trace.path2}, 1);
  }
  const Tensor<T> hidden = gelu(linear(fused_in, layer.fuse_w1, layer.fuse_b1));
  const Tensor<T> fused = linear(hidden, layer.fuse_w2, layer.fuse_b2);
  trace.out = tokens.dim(1) == D ? tokens + fused : fused;
  return trace;
}

template <typename T>
Tensor<T> layer_forward(const DualPathLayer<T>& layer, const ModelConfig& config, const Tensor<T>& maps) {
  if (maps.rank() != 4) throw ShapeError("layer_forward needs [T x C x Hs x Ws], got " + shape_str(maps.shape()));
  const TokenGrid grid{1, maps.dim(0), maps.dim(2), maps.dim(3)};
  const auto partition =
      build_band_partition(next_power_of_two(grid.rows), next_power_of_two(grid.cols), config.bands);
  const auto trace = layer_forward(layer, config, flatten_tokens(maps), grid, partition);
  return unflatten_tokens(trace.out, grid.frames, grid.rows, grid.cols);
}

template <typename T>
RsssmModel<T> RsssmModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
  if (config.layers == 0 || config.embed_dim == 0 || config.state_dim == 0 || config.patch == 0 ||
      config.classes == 0) {
    throw std::invalid_argument("model config needs positive layers, embed_dim, state_dim, patch, classes");
  }
  if (config.bands < 2 || config.high_bands < 1 || config.high_bands >= config.bands) {
    throw std::invalid_argument("model config needs K >= 2 and 1 <= k_h < K");
  }
  std::mt19937_64 rng(seed);
  RsssmModel m;
  m.config_ = config;
  const std::size_t D = config.embed_dim;
  const std::size_t patch_in = config.in_channels * config.patch * config.patch;
  auto ones = [](std::size_t n) { return Tensor<T>::full({n}, T(1), true); };
  auto zeros = [](std::size_t n) { return Tensor<T>::zeros({n}, true); };

  m.embed_w_ = gaussian<T>({patch_in, D}, 1.0 / std::sqrt(static_cast<double>(patch_in)), rng);
  m.embed_b_ = zeros(D);
  m.embed_gain_ = ones(D);
  m.embed_bias_ = zeros(D);

  const std::size_t paths = single_path(config.variant) ? 1 : 2;
  for (std::size_t l = 0; l < config.layers; ++l) {
    DualPathLayer<T> layer;
    layer.norm_gain = ones(D);
    layer.norm_bias = zeros(D);
    layer.proj_w = gaussian<T>({D, D}, 1.0 / std::sqrt(static_cast<double>(D)), rng);
    layer.proj_b = zeros(D);
    if (paths == 2) layer.theta1 = SsmParams<T>::init(D, config.state_dim, rng);
    layer.theta2 = SsmParams<T>::init(D, config.state_dim, rng);
    layer.fuse_w1 = gaussian<T>({paths * D, 2 * D}, 1.0 / std::sqrt(static_cast<double>(paths * D)), rng);
    layer.fuse_b1 = zeros(2 * D);
    layer.fuse_w2 = gaussian<T>({2 * D, D}, 0.5 / std::sqrt(static_cast<double>(2 * D)), rng);
    layer.fuse_b2 = zeros(D);
    m.layers_.push_back(std::move(layer));
  }
  m.head_gain_ = ones(D);
  m.head_bias_ = zeros(D);
  m.head_w_ = gaussian<T>({D, config.classes}, 1.0 / std::sqrt(static_cast<double>(D)), rng);
  m.head_b_ = zeros(config.classes);
  return m;
}

template <typename T>
std::vector<NamedTensor<T>> RsssmModel<T>::parameters() const {
  std::vector<NamedTensor<T>> p{{"embed.weight", embed_w_},
                                {"embed.bias", embed_b_},
                                {"embed.norm.gain", embed_gain_},
                                {"embed.norm.bias", embed_bias_}};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    p.push_back({pre + "norm.gain", L.norm_gain});
    p.push_back({pre + "norm.bias", L.norm_bias});
    p.push_back({pre + "proj.weight", L.proj_w});
    p.push_back({pre + "proj.bias", L.proj_b});
    auto add_ssm = [&](const std::string& tag, const SsmParams<T>& s) {
      if (!s.a_log.defined()) return;
      p.push_back({pre + tag + ".a_log", s.a_log});
      p.push_back({pre + tag + ".b", s.b});
      p.push_back({pre + tag + ".c", s.c});
      p.push_back({pre + tag + ".dt_raw", s.dt_raw});
    };
    add_ssm("theta1", L.theta1);
    add_ssm("theta2", L.theta2);
    p.push_back({pre + "fuse.w1", L.fuse_w1});
    p.push_back({pre + "fuse.b1", L.fuse_b1});
    p.push_back({pre + "fuse.w2", L.fuse_w2});
    p.push_back({pre + "fuse.b2", L.fuse_b2});
  }
  p.push_back({"head.norm.gain", head_gain_});
  p.push_back({"head.norm.bias", head_bias_});
  p.push_back({"head.weight", head_w_});
  p.push_back({"head.bias", head_b_});
  return p;
}

template <typename T>
std::size_t RsssmModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
ModelOutput<T> RsssmModel<T>::forward(const Tensor<T>& frames, std::size_t clips, StreamState<T>* carry) const {
  const auto& cfg = config_;
  if (frames.rank() != 4 || frames.dim(1) != cfg.in_channels) {
    throw ShapeError("model input must be [N x " + std::to_string(cfg.in_channels) +
                     " x H x W], got " + shape_str(frames.shape()));
  }
  const std::size_t n = frames.dim(0), H = frames.dim(2), W = frames.dim(3), p = cfg.patch;
  if (clips == 0 || n % clips != 0) {
    throw ShapeError("frame count " + std::to_string(n) + " is not a multiple of clip count " +
                     std::to_string(clips));
  }
  if (H % p != 0 || W % p != 0) {
    throw ShapeError("image " + std::to_string(H) + "x" + std::to_string(W) +
                     " is not divisible by the patch stride " + std::to_string(p));
  }
  const TokenGrid grid{clips, n / clips, H / p, W / p};
  const std::size_t C = cfg.in_channels;

  const Tensor<T> patches = reshape(
      permute(reshape(frames, {n, C, grid.rows, p, grid.cols, p}), {0, 2, 4, 1, 3, 5}),
      {grid.tokens(), C * p * p});
  Tensor<T> tokens = layer_norm(linear(patches, embed_w_, embed_b_), embed_gain_, embed_bias_);

  const auto partition =
      build_band_partition(next_power_of_two(grid.rows), next_power_of_two(grid.cols), cfg.bands);
  ModelOutput<T> out;
  std::vector<Tensor<T>> ci;
  if (carry) carry->resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto trace = layer_forward(layers_[l], cfg, tokens, grid, partition, carry ? &(*carry)[l] : nullptr);
    tokens = trace.out;
    if (trace.loss_ci.defined()) ci.push_back(reshape(trace.loss_ci, {1}));
    out.layers.push_back(std::move(trace));
  }
  out.loss_ci = ci.empty() ? Tensor<T>::scalar(T(0)) : mean_all(concat(ci, 0));

  const Tensor<T> head = linear(layer_norm(tokens, head_gain_, head_bias_), head_w_, head_b_);
  const Tensor<T> small =
      permute(reshape(head, {n, grid.rows, grid.cols, cfg.classes}), {0, 3, 1, 2});
  out.logits = upsample_bilinear(small, H, W);
  return out;
}

template <typename T>
std::vector<CheckpointEntry> RsssmModel<T>::to_checkpoint() const {
  std::vector<CheckpointEntry> entries;
  for (const auto& p : parameters()) entries.push_back(CheckpointEntry::from_tensor(p.name, p.tensor));
  return entries;
}

template <typename T>
void RsssmModel<T>::load_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto& p : parameters()) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing tensor '" + p.name + "'");
    if (it->second->shape != p.tensor.shape()) {
      throw ShapeError("checkpoint tensor '" + p.name + "' has shape " + shape_str(it->second->shape) +
                       ", model expects " + shape_str(p.tensor.shape()));
    }
    const Tensor<T> src = it->second->template to_tensor<T>();
    std::copy(src.data().begin(), src.data().end(), p.tensor.mutable_data().begin());
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw std::runtime_error("checkpoint has tensor '" + by_name.begin()->first +
                             "' that this model configuration does not use");
  }
}

template <typename T>
Tensor<T> model_forward(const RsssmModel<T>& model, const Tensor<T>& clip) {
  return model.forward(clip, 1).logits;
}

template <typename T>
RsssmModel<T> build_ablation_variant(Variant variant, ModelConfig config, std::uint64_t seed) {
  config.variant = variant;
  auto m = RsssmModel<T>::create(config, seed);
  std::clog << "variant " << variant_name(variant) << ": " << m.parameter_count() << " parameters\n";
  return m;
}

#define RSSSM_INSTANTIATE_MODEL(T)                                                                 \
  template LayerTrace<T> layer_forward(const DualPathLayer<T>&, const ModelConfig&, const Tensor<T>&, \
                                       const TokenGrid&, const BandPartition&, LayerCarry<T>*);   \
  template Tensor<T> layer_forward(const DualPathLayer<T>&, const ModelConfig&, const Tensor<T>&); \
  template class RsssmModel<T>;                                                                    \
  template Tensor<T> model_forward(const RsssmModel<T>&, const Tensor<T>&);                        \
  template RsssmModel<T> build_ablation_variant(Variant, ModelConfig, std::uint64_t);

RSSSM_INSTANTIATE_MODEL(float)
RSSSM_INSTANTIATE_MODEL(double)
RSSSM_INSTANTIATE_MODEL(long double)

}  // namespace rsssm
