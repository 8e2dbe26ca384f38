#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "rsssm/labels.hpp"
#include "rsssm/tensor.hpp"

namespace rsssm {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ShapeKind { Ellipse, Rectangle };

/// One moving object. Position is its centre at trajectory frame 0; the
/// half-extents breathe as (1 +- deform * sin(phase + 2 pi t / period)).
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Ellipse;
  int cls = 1;
  double cx = 0, cy = 0;
  double rx = 8, ry = 8;
  double vx = 0, vy = 0;  // px per trajectory frame
  double deform = 0;      // relative amplitude in [0, 1)
  double phase = 0;
  double texture_angle = 0;  // grating orientation, radians
  double hue = 0;            // in [0, 1); independent of the class
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t trajectory = 10;                     // underlying frames
  std::vector<int> offsets = {-9, -6, -3, 0};      // sampled relative to the last frame
  std::size_t classes = 4;                         // background + objects
  std::size_t shape_count = 3;                     // used when `shapes` is empty
  double max_speed = 1.5;
  double max_deform = 0.2;
  double min_radius = 6, max_radius = 14;
  bool occlusion = true;  // false: shapes may never overlap
  double min_boundary_density = 0.02;
  /// Grating frequency per class in cycles per pixel; index 0 (background)
  /// is unused. Empty selects a default ladder. Object colour is drawn per
  /// shape, so the grating is the only cue that separates object classes.
  std::vector<double> texture_freq;
  /// Explicit objects; empty draws `shape_count` random ones from the seed.
  std::vector<ShapeSpec> shapes;

  std::size_t frames() const { return offsets.size(); }
  void validate() const;
};

/// Planar 8-bit clip: rgb [T x 3 x H x W], mask [T x H x W].
struct Clip {
  std::size_t frames = 0, height = 0, width = 0, classes = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<std::uint8_t> mask;

  bool operator==(const Clip&) const = default;
};

std::vector<double> default_texture_freq(std::size_t classes);

/// Deterministic given the spec. Random scenes are redrawn until they meet
/// the label and boundary-density requirements; explicit scenes that miss
/// them throw SpecError.
Clip generate_clip(const SceneSpec& spec);

/// `count` clips whose seeds derive from `base.seed`; generated on up to
/// `threads` threads (0 picks the hardware concurrency).
std::vector<Clip> generate_clips(const SceneSpec& base, std::size_t count, std::size_t threads = 0);

/// Fraction of pixels with a 4-neighbour of a different label, over all frames.
double boundary_density(const Clip& clip);

/// Frames scaled to [-1, 1]: [T x 3 x H x W].
template <typename T>
Tensor<T> clip_frames(const Clip& clip);
LabelTensor clip_labels(const Clip& clip);

/// Stacks clips along the frame axis, clip-major.
template <typename T>
Tensor<T> batch_frames(const std::vector<const Clip*>& clips);
LabelTensor batch_labels(const std::vector<const Clip*>& clips);

// Binary PPM (P6) and PGM (P5) with maxval 255. Readers throw FormatError
// carrying the byte offset of the problem.
void write_ppm(std::ostream& out, std::size_t width, std::size_t height, const std::uint8_t* interleaved_rgb);
void write_pgm(std::ostream& out, std::size_t width, std::size_t height, const std::uint8_t* gray);

struct Image {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;  // interleaved
  std::size_t data_offset = 0;       // byte position of the first pixel
};
Image read_pnm(std::istream& in);
Image read_pnm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height, const std::uint8_t* gray);

/// dir/manifest.txt plus frame_<t>.ppm and mask_<t>.pgm per frame.
void write_clip(const std::filesystem::path& dir, const Clip& clip);
Clip read_clip(const std::filesystem::path& dir);

/// dir/clip_<i>/ for every clip plus an index file dir/clips.txt. Reading a
/// directory without the index throws std::runtime_error.
void write_split(const std::filesystem::path& dir, const std::vector<Clip>& clips);
std::vector<Clip> read_split(const std::filesystem::path& dir);

}  // namespace rsssm
