#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rsssm/checkpoint.hpp"
#include "rsssm/model.hpp"
#include "rsssm/synthdata.hpp"

namespace rsssm {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("rsssm_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& b) {
  std::ofstream out(p, std::ios::binary);
  out << b;
}

TEST(Pnm, ExactPpmBytes) {
  std::ostringstream out;
  const std::uint8_t zeros[12] = {};
  write_ppm(out, 2, 2, zeros);
  EXPECT_EQ(out.str(), std::string("P6\n2 2\n255\n") + std::string(12, '\0'));
}

TEST(Pnm, PgmRoundTripAndHeaderComments) {
  const std::uint8_t px[6] = {0, 1, 2, 253, 254, 255};
  std::ostringstream out;
  write_pgm(out, 3, 2, px);
  std::istringstream in(out.str());
  const Image img = read_pnm(in);
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.channels, 1u);
  EXPECT_EQ(img.pixels, std::vector<std::uint8_t>(px, px + 6));
  std::istringstream commented("P5\n# note\n3 2\n255\n" + std::string(reinterpret_cast<const char*>(px), 6));
  EXPECT_EQ(read_pnm(commented).pixels, img.pixels);
}

TEST(Pnm, EveryTruncationIsAFormatError) {
  std::vector<std::uint8_t> px(4 * 3 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 7);
  std::ostringstream out;
  write_ppm(out, 4, 3, px.data());
  const std::string full = out.str();
  for (std::size_t n = 0; n < full.size(); ++n) {
    std::istringstream in(full.substr(0, n));
    EXPECT_THROW(read_pnm(in), FormatError) << "prefix " << n;
  }
  std::istringstream bad_magic("P3\n1 1\n255\n\0\0\0");
  EXPECT_THROW(read_pnm(bad_magic), FormatError);
  std::istringstream bad_max("P5\n1 1\n65535\n\0\0");
  EXPECT_THROW(read_pnm(bad_max), FormatError);
}

TEST(Pnm, TruncationReportsOffset) {
  std::ostringstream out;
  const std::uint8_t px[4] = {1, 2, 3, 4};
  write_pgm(out, 2, 2, px);
  std::istringstream in(out.str().substr(0, out.str().size() - 1));
  try {
    read_pnm(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), out.str().size() - 1);
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(ClipFiles, RoundTripIsBitwise) {
  TempDir dir("clip");
  SceneSpec s;
  s.seed = 5;
  const Clip clip = generate_clip(s);
  write_clip(dir.path() / "c", clip);
  EXPECT_EQ(read_clip(dir.path() / "c"), clip);

  const auto clips = generate_clips(s, 3, 1);
  write_split(dir.path() / "split", clips);
  EXPECT_EQ(read_split(dir.path() / "split"), clips);
  EXPECT_THROW(read_split(dir.path() / "absent"), std::runtime_error);
}

TEST(ClipFiles, DamagedFilesAreFormatErrors) {
  TempDir dir("damaged");
  SceneSpec s;
  s.seed = 6;
  const Clip clip = generate_clip(s);
  write_clip(dir.path() / "c", clip);

  const auto frame = dir.path() / "c" / "frame_1.ppm";
  const std::string good = bytes_of(frame);
  write_bytes(frame, good.substr(0, good.size() / 2));
  EXPECT_THROW(read_clip(dir.path() / "c"), FormatError);
  write_bytes(frame, good);

  const auto mask = dir.path() / "c" / "mask_0.pgm";
  std::string m = bytes_of(mask);
  m.back() = static_cast<char>(200);
  write_bytes(mask, m);
  EXPECT_THROW(read_clip(dir.path() / "c"), FormatError);

  const auto manifest = dir.path() / "c" / "manifest.txt";
  const std::string text = bytes_of(manifest);
  write_bytes(manifest, text.substr(0, text.find("height")));
  EXPECT_THROW(read_clip(dir.path() / "c"), FormatError);
  write_bytes(manifest, "something else\n");
  EXPECT_THROW(read_clip(dir.path() / "c"), FormatError);
}

std::vector<CheckpointEntry> sample_entries() {
  std::vector<CheckpointEntry> e;
  e.push_back(CheckpointEntry::from_tensor("a", Tensor<float>({2, 3}, {1.5f, -0.0f, 3.25f, 1e-30f, -7.f, 0.1f})));
  e.push_back(CheckpointEntry::from_tensor("b.weight", Tensor<double>({4}, {0.1, -2.0, 1e300, 5e-324})));
  e.push_back(CheckpointEntry::from_tensor("scalar", Tensor<double>::scalar(3.0)));
  return e;
}

TEST(Checkpoint, StreamLayout) {
  std::ostringstream out;
  write_checkpoint(out, {CheckpointEntry::from_tensor("x", Tensor<float>({1}, {1.0f}))});
  const std::string b = out.str();
  const std::string expect = std::string("RSSM") + std::string("\x01\x00", 2) + std::string("\x01\x00", 2) + "x" +
                             std::string("\x00\x01", 2) + std::string("\x01\x00\x00\x00", 4) +
                             std::string("\x00\x00\x80\x3f", 4);
  EXPECT_EQ(b, expect);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto entries = sample_entries();
  std::ostringstream out;
  write_checkpoint(out, entries);
  std::istringstream in(out.str());
  const auto back = read_checkpoint(in);
  EXPECT_EQ(back, entries);
  std::ostringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), out.str());
  const auto t = back[1].to_tensor<double>();
  EXPECT_EQ(t.data()[3], 5e-324);
  const auto widened = back[0].to_tensor<double>();
  EXPECT_EQ(widened.data()[3], static_cast<double>(1e-30f));
}

TEST(Checkpoint, TruncatedPrefixesAreDiagnosed) {
  const auto entries = sample_entries();
  std::ostringstream out;
  write_checkpoint(out, entries);
  const std::string full = out.str();
  // Entry boundaries: a cut exactly there parses to fewer entries.
  std::vector<std::size_t> boundaries{6};
  for (std::size_t k = 1; k <= entries.size(); ++k) {
    std::ostringstream part;
    write_checkpoint(part, std::vector<CheckpointEntry>(entries.begin(), entries.begin() + k));
    boundaries.push_back(part.str().size());
  }
  for (std::size_t n = 0; n < full.size(); ++n) {
    std::istringstream in(full.substr(0, n));
    const auto it = std::find(boundaries.begin(), boundaries.end(), n);
    if (it == boundaries.end()) {
      EXPECT_THROW(read_checkpoint(in), FormatError) << "prefix " << n;
    } else {
      const auto got = read_checkpoint(in);
      EXPECT_EQ(got.size(), static_cast<std::size_t>(it - boundaries.begin())) << "prefix " << n;
    }
  }
}

TEST(Checkpoint, BoundaryTruncatedModelFileFailsToLoad) {
  TempDir dir("ckpt");
  ModelConfig cfg;
  cfg.embed_dim = 4;
  cfg.state_dim = 2;
  auto model = RsssmModel<double>::create(cfg, 1);
  auto entries = model.to_checkpoint();
  save_checkpoint(dir.path() / "m.ckpt", entries);
  auto loaded = RsssmModel<double>::create(cfg, 2);
  loaded.load_checkpoint(load_checkpoint(dir.path() / "m.ckpt"));
  EXPECT_EQ(loaded.to_checkpoint(), entries);
  entries.pop_back();
  save_checkpoint(dir.path() / "short.ckpt", entries);
  EXPECT_THROW(loaded.load_checkpoint(load_checkpoint(dir.path() / "short.ckpt")), std::runtime_error);
  EXPECT_THROW(load_checkpoint(dir.path() / "absent.ckpt"), std::runtime_error);
}

TEST(Checkpoint, RejectsBadHeaders) {
  std::istringstream magic("RSSX\x01\x00");
  EXPECT_THROW(read_checkpoint(magic), FormatError);
  std::istringstream version(std::string("RSSM\x02\x00", 6));
  EXPECT_THROW(read_checkpoint(version), FormatError);
  std::istringstream dtype(std::string("RSSM\x01\x00\x01\x00x\x07\x00", 11));
  EXPECT_THROW(read_checkpoint(dtype), FormatError);
}

}  // namespace
}  // namespace rsssm
