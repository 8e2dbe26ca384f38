#include <gtest/gtest.h>

#include <sstream>

#include "rsssm/config.hpp"

namespace rsssm {
namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  const auto c = parse(
      "# model\n"
      "model.layers = 3\n"
      "  model.variant=No-CwAP   # trailing comment\n"
      "\n"
      "loss.lambda_i = 0.25\n"
      "precision = f64\n"
      "seed = 9\n"
      "data.offsets = -6, -3, 0\n"
      "model.force_alpha = 0.5\n");
  EXPECT_EQ(c.model.layers, 3u);
  EXPECT_EQ(c.model.variant, Variant::NoCwap);
  EXPECT_EQ(c.train.loss.lambda_i, 0.25);
  EXPECT_EQ(c.precision, Precision::F64);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.data.scene.offsets, (std::vector<int>{-6, -3, 0}));
  ASSERT_TRUE(c.model.fgir.force_alpha.has_value());
  EXPECT_EQ(*c.model.fgir.force_alpha, 0.5);
}

TEST(Config, ErrorsNameLineAndKey) {
  try {
    parse("model.layers = 2\n\nmodel.colour = red\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.key(), "model.colour");
    EXPECT_NE(std::string(e.what()).find("test.cfg:3"), std::string::npos);
  }
  try {
    parse("train.steps = lots\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.key(), "train.steps");
  }
  EXPECT_THROW(parse("just words\n"), ConfigError);
  EXPECT_THROW(parse("model.layers =\n"), ConfigError);
  EXPECT_THROW(parse("model.variant = mamba\n"), ConfigError);
  EXPECT_THROW(parse("eval.streaming = maybe\n"), ConfigError);
}

TEST(Config, SerializeRoundTrips) {
  auto c = parse(
      "model.embed_dim = 16\nmodel.invert_axis = state\nloss.lambda = 0.75\ndata.texture_freq = 0, 0.1, 0.2, 0.3\n"
      "bench.lengths = 256, 512\nablate.seeds = 4, 5\ntrain.lr = 0.00123456789\n");
  const std::string text = c.serialize();
  std::istringstream in(text);
  const auto back = parse_config(in);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.model.fgir.axis, InvertAxis::StateDims);
  EXPECT_EQ(back.train.optim.lr, 0.00123456789);
  EXPECT_EQ(back.ablate_seeds, (std::vector<std::uint64_t>{4, 5}));
}

TEST(Config, OverridesApplyOnTopOfAFile) {
  auto c = parse("model.layers = 3\ntrain.steps = 10\n");
  c.set("train.steps", "20", "--set");
  EXPECT_EQ(c.train.steps, 20u);
  EXPECT_EQ(c.model.layers, 3u);
  try {
    c.set("nope", "1", "--set");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 0u);
    EXPECT_EQ(e.key(), "nope");
  }
}

TEST(Config, DataClassesDriveModelClasses) {
  const auto c = parse("data.classes = 6\n");
  EXPECT_EQ(c.model.classes, 6u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ValidateCatchesInconsistentSettings) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.model.high_bands = c.model.bands;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.model.patch = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.set("model.force_alpha", "1.5");
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.data.scene.classes = 1;
  c.model.classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, AblationDefaults) {
  const auto c = ablation_defaults();
  EXPECT_EQ(c.model.embed_dim, 32u);
  EXPECT_EQ(c.train.steps, 2000u);
  EXPECT_EQ(c.train.optim.lr, 1e-3);
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace rsssm
