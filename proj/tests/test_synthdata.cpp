#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "rsssm/synthdata.hpp"

namespace rsssm {
namespace {

SceneSpec static_circle(double radius) {
  SceneSpec s;
  s.height = 64;
  s.width = 64;
  s.classes = 3;
  ShapeSpec c;
  c.cls = 2;
  c.cx = 31.5;
  c.cy = 31.5;
  c.rx = c.ry = radius;
  s.shapes = {c};
  s.min_boundary_density = 0.0;  // small circles sit below the generator's default
  return s;
}

TEST(Synth, StaticSceneRepeatsEveryFrame) {
  const Clip clip = generate_clip(static_circle(10));
  const std::size_t hw = 64 * 64;
  ASSERT_EQ(clip.frames, 4u);
  for (std::size_t t = 1; t < clip.frames; ++t) {
    EXPECT_TRUE(std::equal(clip.mask.begin(), clip.mask.begin() + hw, clip.mask.begin() + t * hw));
    EXPECT_TRUE(std::equal(clip.rgb.begin(), clip.rgb.begin() + 3 * hw, clip.rgb.begin() + 3 * t * hw));
  }
}

TEST(Synth, CircleAreaMatchesGeometry) {
  for (double r : {6.0, 10.0, 17.0}) {
    const Clip clip = generate_clip(static_circle(r));
    std::size_t area = 0;
    for (std::size_t i = 0; i < 64 * 64; ++i) area += clip.mask[i] == 2;
    EXPECT_NEAR(static_cast<double>(area), std::numbers::pi * r * r, 4 * r) << "r=" << r;
  }
}

TEST(Synth, DeterministicPerSeedAndDistinctAcrossSeeds) {
  SceneSpec s;
  s.seed = 42;
  const Clip a = generate_clip(s), b = generate_clip(s);
  EXPECT_EQ(a, b);
  s.seed = 43;
  EXPECT_NE(a.mask, generate_clip(s).mask);
  const auto batch1 = generate_clips(s, 4, 1), batch2 = generate_clips(s, 4, 3);
  EXPECT_EQ(batch1, batch2);
}

TEST(Synth, LabelsAndBoundariesMeetRequirements) {
  SceneSpec s;
  for (const Clip& clip : generate_clips(s, 10, 0)) {
    const std::size_t hw = clip.height * clip.width;
    for (std::size_t t = 0; t < clip.frames; ++t) {
      std::set<int> seen;
      for (std::size_t i = 0; i < hw; ++i) seen.insert(clip.mask[t * hw + i]);
      EXPECT_GE(seen.size(), 2u);
      for (int v : seen) EXPECT_LT(v, static_cast<int>(clip.classes));
    }
    EXPECT_GE(boundary_density(clip), s.min_boundary_density);
  }
}

TEST(Synth, NoOcclusionKeepsShapesApart) {
  SceneSpec s = static_circle(8);
  s.occlusion = false;
  ShapeSpec other = s.shapes[0];
  other.cx = 36;
  other.cls = 1;
  s.shapes.push_back(other);
  EXPECT_THROW(generate_clip(s), SpecError);
  s.shapes[1].cx = 12;
  s.shapes[1].cy = 12;
  s.shapes[0].cx = 48;
  s.shapes[0].cy = 48;
  EXPECT_NO_THROW(generate_clip(s));
}

TEST(Synth, InvalidSpecsThrow) {
  SceneSpec s;
  s.classes = 1;
  EXPECT_THROW(s.validate(), SpecError);
  s = SceneSpec{};
  s.offsets = {-20, 0};
  EXPECT_THROW(s.validate(), SpecError);
  s = SceneSpec{};
  s.height = 4;
  EXPECT_THROW(s.validate(), SpecError);
  s = SceneSpec{};
  s.texture_freq = {0.1, 0.2};
  EXPECT_THROW(s.validate(), SpecError);
  SceneSpec off = static_circle(10);
  off.shapes[0].cx = 2;
  EXPECT_THROW(generate_clip(off), SpecError);
  SceneSpec bad_class = static_circle(10);
  bad_class.shapes[0].cls = 3;
  EXPECT_THROW(generate_clip(bad_class), SpecError);
  SceneSpec tiny = static_circle(1.2);
  tiny.min_boundary_density = 0.5;
  EXPECT_THROW(generate_clip(tiny), SpecError);
}

TEST(Synth, DefaultTextureLadder) {
  const auto f = default_texture_freq(4);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_DOUBLE_EQ(f[1], 0.06);
  EXPECT_DOUBLE_EQ(f[2], 0.18);
  EXPECT_DOUBLE_EQ(f[3], 0.30);
}

TEST(Synth, FramesAndLabelsConvert) {
  const Clip clip = generate_clip(static_circle(10));
  const auto x = clip_frames<double>(clip);
  EXPECT_EQ(x.shape(), (Shape{4, 3, 64, 64}));
  for (double v : x.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_DOUBLE_EQ(x.data()[0], clip.rgb[0] / 127.5 - 1.0);
  const auto y = clip_labels(clip);
  EXPECT_EQ(y.shape, (Shape{4, 64, 64}));
  const auto both = batch_frames<double>({&clip, &clip});
  EXPECT_EQ(both.shape(), (Shape{8, 3, 64, 64}));
  EXPECT_EQ(batch_labels({&clip, &clip}).data.size(), 2 * y.data.size());
}

}  // namespace
}  // namespace rsssm
