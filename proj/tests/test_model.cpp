#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "rsssm/gradcheck.hpp"
#include "rsssm/model.hpp"
#include "rsssm/ops.hpp"
#include "test_util.hpp"

namespace rsssm {
namespace {

using testing::random_tensor;
using Td = Tensor<double>;

ModelConfig small_config(Variant v) {
  ModelConfig c;
  c.layers = 2;
  c.embed_dim = 6;
  c.state_dim = 3;
  c.bands = 4;
  c.high_bands = 2;
  c.classes = 3;
  c.variant = v;
  return c;
}

Td random_frames(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor({n, 3, h, w}, rng, -1, 1, false);
}

double max_abs_diff(const Td& a, const Td& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

TEST(Variants, NamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_EQ(parse_variant("rs-ssm"), Variant::RsSsm);
  EXPECT_THROW(parse_variant("mamba"), std::invalid_argument);
}

TEST(Variants, ParameterCountsOrdered) {
  std::size_t counts[4];
  for (std::size_t i = 0; i < 4; ++i)
    counts[i] = RsssmModel<double>::create(small_config(kAllVariants[i]), 1).parameter_count();
  EXPECT_LT(counts[0], counts[1]);
  EXPECT_LE(counts[1], counts[2]);
  EXPECT_EQ(counts[2], counts[3]);
  // Second path adds one SSM parameter set and D more fusion inputs per layer.
  const std::size_t D = 6, S = 3;
  EXPECT_EQ(counts[1] - counts[0], 2 * (3 * D * S + D + D * 2 * D));
}

TEST(Model, LogitShapes) {
  for (Variant v : kAllVariants) {
    const auto m = RsssmModel<double>::create(small_config(v), 2);
    const auto out = m.forward(random_frames(6, 16, 8, 3), 2);
    EXPECT_EQ(out.logits.shape(), (Shape{6, 3, 16, 8})) << variant_name(v);
    EXPECT_EQ(out.layers.size(), 2u);
    EXPECT_EQ(out.loss_ci.numel(), 1u);
  }
}

TEST(Model, RejectsBadInputs) {
  const auto m = RsssmModel<double>::create(small_config(Variant::RsSsm), 2);
  EXPECT_THROW(m.forward(random_frames(3, 16, 16, 1), 2), ShapeError);
  EXPECT_THROW(m.forward(random_frames(2, 10, 16, 1), 1), ShapeError);
  EXPECT_THROW(m.forward(Td::zeros({2, 1, 16, 16}), 1), ShapeError);
  auto bad = small_config(Variant::RsSsm);
  bad.high_bands = 4;
  EXPECT_THROW(RsssmModel<double>::create(bad, 0), std::invalid_argument);
}

TEST(Model, NoCwapUsesPlainInvertedGate) {
  const auto m = RsssmModel<double>::create(small_config(Variant::NoCwap), 4);
  const auto out = m.forward(random_frames(2, 16, 16, 5));
  for (const auto& layer : out.layers) {
    ASSERT_TRUE(layer.gate.has_value());
    EXPECT_EQ(max_abs_diff(layer.gate->a_refined, layer.gate->a_inverted), 0.0);
    EXPECT_FALSE(layer.spectrum.has_value());
  }
  EXPECT_EQ(out.loss_ci.item(), 0.0);
}

TEST(Model, ChannelInfoOnlyForSpectrumVariant) {
  for (Variant v : kAllVariants) {
    const auto out = RsssmModel<double>::create(small_config(v), 4).forward(random_frames(2, 16, 16, 6));
    if (v == Variant::RsSsm) {
      EXPECT_GT(out.loss_ci.item(), 0.0);
      EXPECT_LE(out.loss_ci.item(), 1.0);
    } else {
      EXPECT_EQ(out.loss_ci.item(), 0.0);
    }
  }
}

TEST(Model, DetachedSpectrumSendsNoChannelInfoGradient) {
  auto cfg = small_config(Variant::RsSsm);
  cfg.detach_spectrum = true;
  for (const auto& [name, g] : channel_info_gradients(cfg, 8, 8, 2, 3)) EXPECT_EQ(g, 0.0) << name;
  cfg.detach_spectrum = false;
  double total = 0;
  for (const auto& [name, g] : channel_info_gradients(cfg, 8, 8, 2, 3)) total += g;
  EXPECT_GT(total, 0.0);
}

TEST(Model, SingleClassHeadPredictsOneClass) {
  auto cfg = small_config(Variant::BiVSsm);
  cfg.classes = 1;
  const auto out = RsssmModel<double>::create(cfg, 1).forward(random_frames(2, 8, 8, 2));
  EXPECT_EQ(out.logits.shape(), (Shape{2, 1, 8, 8}));
  const auto soft = softmax(out.logits, 1);
  for (double p : soft.data()) EXPECT_EQ(p, 1.0);
}

TEST(Model, FrameOrderMatters) {
  const auto m = RsssmModel<double>::create(small_config(Variant::RsSsm), 7);
  const Td frames = random_frames(3, 8, 8, 8);
  const Td swapped = concat<double>({slice(frames, 0, 1, 2), slice(frames, 0, 0, 1), slice(frames, 0, 2, 3)}, 0);
  const auto a = m.forward(frames).logits, b = m.forward(swapped).logits;
  // The last frame sees the same content in a different order.
  EXPECT_GT(max_abs_diff(select(a, 0, 2), select(b, 0, 2)), 1e-9);
}

TEST(Layer, ZeroInputGivesZeroOutput) {
  const auto m = RsssmModel<double>::create(small_config(Variant::BiVSsm), 9);
  const auto& cfg = m.config();
  const auto out = layer_forward(m.layers()[0], cfg, Td::zeros({2, 6, 4, 4}));
  EXPECT_EQ(out.shape(), (Shape{2, 6, 4, 4}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Layer, BothPathsReadTheSharedProjection) {
  auto m = RsssmModel<double>::create(small_config(Variant::BiVSsm), 10);
  auto& layer = m.layers()[0];
  // With identical parameters the two paths must agree exactly.
  for (auto [dst, src] : {std::pair{layer.theta1.a_log, layer.theta2.a_log}, std::pair{layer.theta1.b, layer.theta2.b},
                          std::pair{layer.theta1.c, layer.theta2.c},
                          std::pair{layer.theta1.dt_raw, layer.theta2.dt_raw}}) {
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
  const auto out = m.forward(random_frames(2, 8, 8, 11));
  EXPECT_EQ(max_abs_diff(out.layers[0].path1, out.layers[0].path2), 0.0);
}

TEST(Layer, BiPathWithCopiedThetaMatchesSingleWhenFusionSplits) {
  // Splitting the fusion weight over identical path outputs reproduces the
  // single-path layer.
  const auto single = RsssmModel<double>::create(small_config(Variant::VSsm), 12);
  auto dual = RsssmModel<double>::create(small_config(Variant::BiVSsm), 12);
  const std::size_t D = 6;
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& s = single.layers()[l];
    auto& d = dual.layers()[l];
    auto copy = [](const Td& src, Td dst) { std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin()); };
    for (auto* t : {&d.theta1, &d.theta2}) {
      copy(s.theta2.a_log, t->a_log);
      copy(s.theta2.b, t->b);
      copy(s.theta2.c, t->c);
      copy(s.theta2.dt_raw, t->dt_raw);
    }
    for (auto [src, dst] : {std::pair{s.norm_gain, d.norm_gain}, std::pair{s.norm_bias, d.norm_bias},
                            std::pair{s.proj_w, d.proj_w}, std::pair{s.proj_b, d.proj_b},
                            std::pair{s.fuse_b1, d.fuse_b1}, std::pair{s.fuse_w2, d.fuse_w2},
                            std::pair{s.fuse_b2, d.fuse_b2}})
      copy(src, dst);
    auto w = d.fuse_w1.mutable_data();
    for (std::size_t r = 0; r < 2 * D; ++r)
      for (std::size_t c = 0; c < 2 * D; ++c) w[r * 2 * D + c] = 0.5 * s.fuse_w1.data()[(r % D) * 2 * D + c];
  }
  auto copy_named = [&](const std::string& prefix) {
    const auto sp = single.parameters();
    const auto dp = dual.parameters();
    for (const auto& a : sp)
      for (const auto& b : dp)
        if (a.name == b.name && a.name.rfind(prefix, 0) == 0) {
          auto target = b.tensor;
          std::copy(a.tensor.data().begin(), a.tensor.data().end(), target.mutable_data().begin());
        }
  };
  copy_named("embed");
  copy_named("head");
  const Td frames = random_frames(2, 8, 8, 13);
  EXPECT_LT(max_abs_diff(single.forward(frames).logits, dual.forward(frames).logits), 1e-12);
}

TEST(Model, DeterministicForSeed) {
  const auto a = RsssmModel<double>::create(small_config(Variant::RsSsm), 14);
  const auto b = RsssmModel<double>::create(small_config(Variant::RsSsm), 14);
  const auto c = RsssmModel<double>::create(small_config(Variant::RsSsm), 15);
  EXPECT_EQ(a.to_checkpoint(), b.to_checkpoint());
  EXPECT_NE(a.to_checkpoint(), c.to_checkpoint());
  const Td frames = random_frames(2, 8, 8, 16);
  EXPECT_EQ(max_abs_diff(a.forward(frames).logits, b.forward(frames).logits), 0.0);
}

TEST(Model, ParameterNamesAreUniqueAndStable) {
  const auto m = RsssmModel<double>::create(small_config(Variant::RsSsm), 0);
  const auto p = m.parameters();
  std::set<std::string> names;
  for (const auto& e : p) EXPECT_TRUE(names.insert(e.name).second) << e.name;
  EXPECT_EQ(p.front().name, "embed.weight");
  EXPECT_EQ(p.back().name, "head.bias");
  EXPECT_EQ(module_of("layers.0.fuse.w1"), "fuse");
}

TEST(Model, CheckpointRoundTripAndLoadErrors) {
  const auto a = RsssmModel<double>::create(small_config(Variant::RsSsm), 17);
  auto b = RsssmModel<double>::create(small_config(Variant::RsSsm), 18);
  b.load_checkpoint(a.to_checkpoint());
  EXPECT_EQ(a.to_checkpoint(), b.to_checkpoint());

  auto missing = a.to_checkpoint();
  missing.pop_back();
  EXPECT_THROW(b.load_checkpoint(missing), std::runtime_error);

  auto extra = a.to_checkpoint();
  extra.push_back(CheckpointEntry::from_tensor("stray", Td::zeros({1})));
  EXPECT_THROW(b.load_checkpoint(extra), std::runtime_error);

  auto other = RsssmModel<double>::create(small_config(Variant::VSsm), 17);
  EXPECT_THROW(other.load_checkpoint(a.to_checkpoint()), std::exception);

  auto wide = small_config(Variant::RsSsm);
  wide.embed_dim = 8;
  auto mismatched = RsssmModel<double>::create(wide, 17);
  EXPECT_THROW(mismatched.load_checkpoint(a.to_checkpoint()), ShapeError);
}

TEST(Model, StreamingCarryEqualsOneLongScan) {
  // Without spectrum features every op except the scans is per token, so two
  // streamed clips must match one clip holding both.
  const auto m = RsssmModel<double>::create(small_config(Variant::BiVSsm), 19);
  const Td first = random_frames(2, 8, 8, 20), second = random_frames(2, 8, 8, 21);
  StreamState<double> carry;
  const auto a = m.forward(first, 1, &carry).logits;
  const auto b = m.forward(second, 1, &carry).logits;
  const auto whole = m.forward(concat<double>({first, second}, 0)).logits;
  EXPECT_LT(max_abs_diff(concat<double>({a, b}, 0), whole), 1e-12);
  const auto fresh = m.forward(second).logits;
  EXPECT_GT(max_abs_diff(b, fresh), 1e-9);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  auto cfg = small_config(Variant::RsSsm);
  cfg.embed_dim = 4;
  cfg.state_dim = 2;
  const auto report = gradcheck_model(cfg, 8, 8, 2, 3, 1e-5, 1e-4);
  std::ostringstream text;
  write_report(text, report);
  EXPECT_TRUE(report.passed()) << text.str();
  EXPECT_FALSE(report.leaves.empty());
}

}  // namespace
}  // namespace rsssm
