#include "rsssm/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "rsssm/format_error.hpp"

namespace rsssm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Placement {
  double cx, cy, rx, ry;
};

Placement place(const ShapeSpec& s, std::size_t tau, std::size_t trajectory) {
  const double t = static_cast<double>(tau);
  const double wobble = s.deform * std::sin(s.phase + kTwoPi * t / static_cast<double>(trajectory));
  return {s.cx + s.vx * t, s.cy + s.vy * t, s.rx * (1.0 + wobble), s.ry * (1.0 - wobble)};
}

bool covers(const ShapeSpec& s, const Placement& p, double x, double y) {
  const double dx = (x - p.cx) / p.rx, dy = (y - p.cy) / p.ry;
  if (s.kind == ShapeKind::Ellipse) return dx * dx + dy * dy <= 1.0;
  return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

bool inside_canvas(const ShapeSpec& s, const SceneSpec& spec) {
  const double W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);
  for (std::size_t tau = 0; tau < spec.trajectory; ++tau) {
    const auto p = place(s, tau, spec.trajectory);
    if (p.cx - p.rx < 1.0 || p.cx + p.rx > W - 1.0 || p.cy - p.ry < 1.0 || p.cy + p.ry > H - 1.0) return false;
  }
  return true;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double f = h * 6.0;
  const int sector = static_cast<int>(f) % 6;
  const double frac = f - std::floor(f);
  const double p = v * (1 - s), q = v * (1 - s * frac), t = v * (1 - s * (1 - frac));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ShapeSpec random_shape(const SceneSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::uniform_int_distribution<int> cls(1, static_cast<int>(spec.classes) - 1);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ShapeSpec s;
    s.kind = unit(rng) < 0.5 ? ShapeKind::Ellipse : ShapeKind::Rectangle;
    s.cls = cls(rng);
    const double r = uniform(spec.min_radius, spec.max_radius);
    const double aspect = uniform(0.7, 1.3);
    s.rx = r * aspect;
    s.ry = r / aspect;
    s.vx = uniform(-spec.max_speed, spec.max_speed);
    s.vy = uniform(-spec.max_speed, spec.max_speed);
    s.deform = uniform(0.0, spec.max_deform);
    s.phase = uniform(0.0, kTwoPi);
    s.texture_angle = uniform(0.0, std::numbers::pi);
    s.hue = unit(rng);
    s.cx = uniform(0.0, static_cast<double>(spec.width));
    s.cy = uniform(0.0, static_cast<double>(spec.height));
    if (inside_canvas(s, spec)) return s;
  }
  throw SpecError("cannot place a shape inside a " + std::to_string(spec.width) + "x" +
                  std::to_string(spec.height) + " canvas; reduce radius or speed");
}

struct Rendered {
  Clip clip;
  bool overlap = false;
};

Rendered render(const SceneSpec& spec, const std::vector<ShapeSpec>& shapes, std::mt19937_64& rng) {
  const std::size_t T = spec.frames(), H = spec.height, W = spec.width;
  const auto freq = spec.texture_freq.empty() ? default_texture_freq(spec.classes) : spec.texture_freq;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double bg_hue = unit(rng), bg_angle = unit(rng) * kTwoPi;
  const auto bg_lo = hsv_to_rgb(bg_hue, 0.25, 0.25 + 0.1 * unit(rng));
  const auto bg_hi = hsv_to_rgb(bg_hue + 0.1, 0.25, 0.6 + 0.1 * unit(rng));

  Rendered out;
  Clip& c = out.clip;
  c.frames = T;
  c.height = H;
  c.width = W;
  c.classes = spec.classes;
  c.seed = spec.seed;
  c.rgb.assign(T * 3 * H * W, 0);
  c.mask.assign(T * H * W, 0);

  for (std::size_t f = 0; f < T; ++f) {
    const auto tau = static_cast<std::size_t>(static_cast<int>(spec.trajectory) - 1 + spec.offsets[f]);
    std::vector<Placement> placed;
    for (const auto& s : shapes) placed.push_back(place(s, tau, spec.trajectory));
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t col = 0; col < W; ++col) {
        const double x = static_cast<double>(col) + 0.5, y = static_cast<double>(r) + 0.5;
        const double u = (x * std::cos(bg_angle) + y * std::sin(bg_angle)) / static_cast<double>(W + H) + 0.5;
        std::array<double, 3> rgb;
        for (int k = 0; k < 3; ++k) rgb[k] = bg_lo[k] + (bg_hi[k] - bg_lo[k]) * std::clamp(u, 0.0, 1.0);
        int label = 0, hits = 0;
        for (std::size_t i = 0; i < shapes.size(); ++i) {
          const auto& s = shapes[i];
          if (!covers(s, placed[i], x, y)) continue;
          ++hits;
          label = s.cls;
          const double lx = x - placed[i].cx, ly = y - placed[i].cy;
          const double along = lx * std::cos(s.texture_angle) + ly * std::sin(s.texture_angle);
          const double grating = 0.5 + 0.5 * std::sin(kTwoPi * freq[static_cast<std::size_t>(s.cls)] * along);
          rgb = hsv_to_rgb(s.hue, 0.65, 0.3 + 0.6 * grating);
        }
        out.overlap = out.overlap || hits > 1;
        c.mask[(f * H + r) * W + col] = static_cast<std::uint8_t>(label);
        for (std::size_t k = 0; k < 3; ++k) c.rgb[((f * 3 + k) * H + r) * W + col] = to_byte(rgb[k]);
      }
    }
  }
  return out;
}

// Empty string when the clip meets the label and boundary requirements.
std::string clip_problem(const Clip& clip, const SceneSpec& spec) {
  const std::size_t hw = clip.height * clip.width;
  for (std::size_t f = 0; f < clip.frames; ++f) {
    const auto first = clip.mask.begin() + static_cast<std::ptrdiff_t>(f * hw);
    if (std::all_of(first, first + static_cast<std::ptrdiff_t>(hw), [&](std::uint8_t v) { return v == *first; })) {
      return "frame " + std::to_string(f) + " has a single label";
    }
  }
  const double density = boundary_density(clip);
  if (density < spec.min_boundary_density) {
    std::ostringstream msg;
    msg << "boundary density " << density << " below minimum " << spec.min_boundary_density;
    return msg.str();
  }
  return {};
}

}  // namespace

std::vector<double> default_texture_freq(std::size_t classes) {
  std::vector<double> f(classes, 0.0);
  const double span = static_cast<double>(std::max<std::size_t>(classes, 3) - 2);
  for (std::size_t k = 1; k < classes; ++k) f[k] = 0.06 + 0.24 * static_cast<double>(k - 1) / span;
  return f;
}

void SceneSpec::validate() const {
  if (height < 8 || width < 8) throw SpecError("canvas must be at least 8x8");
  if (classes < 2 || classes > 255) throw SpecError("classes must be in [2, 255], got " + std::to_string(classes));
  if (trajectory == 0 || offsets.empty()) throw SpecError("need a non-empty trajectory and frame offsets");
  for (int o : offsets) {
    if (o > 0 || -o >= static_cast<int>(trajectory)) {
      throw SpecError("frame offset " + std::to_string(o) + " outside a " + std::to_string(trajectory) +
                      "-frame trajectory");
    }
  }
  if (!texture_freq.empty() && texture_freq.size() != classes) {
    throw SpecError("texture_freq needs one entry per class (" + std::to_string(classes) + ")");
  }
  if (shapes.empty()) {
    if (shape_count == 0) throw SpecError("shape_count must be positive");
    if (!(min_radius > 0.0) || max_radius < min_radius) throw SpecError("need 0 < min_radius <= max_radius");
    if (max_speed < 0.0 || max_deform < 0.0 || max_deform >= 1.0) throw SpecError("invalid speed or deformation range");
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const std::string tag = "shape " + std::to_string(i);
    if (s.cls < 1 || s.cls >= static_cast<int>(classes)) throw SpecError(tag + " has class outside [1, classes)");
    if (!(s.rx > 0.0) || !(s.ry > 0.0)) throw SpecError(tag + " needs positive half-extents");
    if (s.deform < 0.0 || s.deform >= 1.0) throw SpecError(tag + " deformation must be in [0, 1)");
    if (!inside_canvas(s, *this)) throw SpecError(tag + " leaves the 1 px canvas margin during its trajectory");
  }
}

Clip generate_clip(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  if (!spec.shapes.empty()) {
    auto rendered = render(spec, spec.shapes, rng);
    if (!spec.occlusion && rendered.overlap) throw SpecError("shapes overlap but occlusion is disabled");
    if (auto problem = clip_problem(rendered.clip, spec); !problem.empty()) throw SpecError(problem);
    return std::move(rendered.clip);
  }
  std::string last;
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<ShapeSpec> shapes;
    for (std::size_t i = 0; i < spec.shape_count; ++i) shapes.push_back(random_shape(spec, rng));
    auto rendered = render(spec, shapes, rng);
    if (!spec.occlusion && rendered.overlap) {
      last = "shapes overlap";
      continue;
    }
    last = clip_problem(rendered.clip, spec);
    if (last.empty()) return std::move(rendered.clip);
  }
  throw SpecError("could not draw a valid scene for seed " + std::to_string(spec.seed) + ": " + last);
}

std::vector<Clip> generate_clips(const SceneSpec& base, std::size_t count, std::size_t threads) {
  base.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  std::vector<Clip> clips(count);
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < count; i += threads) {
        SceneSpec s = base;
        s.seed = splitmix64(base.seed ^ splitmix64(i));
        clips[i] = generate_clip(s);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return clips;
}

double boundary_density(const Clip& clip) {
  const std::size_t H = clip.height, W = clip.width;
  std::size_t edge = 0;
  for (std::size_t f = 0; f < clip.frames; ++f) {
    const std::uint8_t* m = clip.mask.data() + f * H * W;
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        const auto v = m[r * W + c];
        if ((r > 0 && m[(r - 1) * W + c] != v) || (r + 1 < H && m[(r + 1) * W + c] != v) ||
            (c > 0 && m[r * W + c - 1] != v) || (c + 1 < W && m[r * W + c + 1] != v)) {
          ++edge;
        }
      }
    }
  }
  const std::size_t total = clip.frames * H * W;
  return total ? static_cast<double>(edge) / static_cast<double>(total) : 0.0;
}

template <typename T>
Tensor<T> clip_frames(const Clip& clip) {
  return batch_frames<T>({&clip});
}

LabelTensor clip_labels(const Clip& clip) { return batch_labels({&clip}); }

template <typename T>
Tensor<T> batch_frames(const std::vector<const Clip*>& clips) {
  if (clips.empty()) throw std::invalid_argument("batch_frames needs at least one clip");
  const Clip& first = *clips.front();
  std::vector<T> data;
  data.reserve(clips.size() * first.rgb.size());
  for (const Clip* c : clips) {
    if (c->frames != first.frames || c->height != first.height || c->width != first.width) {
      throw ShapeError("clips in a batch must share frames and size");
    }
    for (auto v : c->rgb) data.push_back(static_cast<T>(v) / T(127.5) - T(1));
  }
  return Tensor<T>({clips.size() * first.frames, 3, first.height, first.width}, std::move(data));
}

LabelTensor batch_labels(const std::vector<const Clip*>& clips) {
  if (clips.empty()) throw std::invalid_argument("batch_labels needs at least one clip");
  const Clip& first = *clips.front();
  LabelTensor out{{clips.size() * first.frames, first.height, first.width}, {}};
  out.data.reserve(numel(out.shape));
  for (const Clip* c : clips) {
    if (c->frames != first.frames || c->height != first.height || c->width != first.width) {
      throw ShapeError("clips in a batch must share frames and size");
    }
    out.data.insert(out.data.end(), c->mask.begin(), c->mask.end());
  }
  return out;
}

template Tensor<float> clip_frames(const Clip&);
template Tensor<double> clip_frames(const Clip&);
template Tensor<float> batch_frames(const std::vector<const Clip*>&);
template Tensor<double> batch_frames(const std::vector<const Clip*>&);

// ---- PNM ----

namespace {

void write_pnm(std::ostream& out, const char* magic, std::size_t width, std::size_t height, std::size_t channels,
               const std::uint8_t* pixels) {
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels), static_cast<std::streamsize>(width * height * channels));
  if (!out) throw std::runtime_error("failed to write image stream");
}

class HeaderParser {
 public:
  explicit HeaderParser(const std::string& bytes) : b_(bytes) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (value > (1u << 24)) throw FormatError(std::string(what) + " is implausibly large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw FormatError(pos_ >= b_.size() ? std::string("file truncated before ") + what
                                          : std::string("expected ") + what,
                        pos_);
    }
    return value;
  }

  void single_whitespace() {
    if (pos_ >= b_.size()) throw FormatError("file truncated after header", pos_);
    if (!std::isspace(static_cast<unsigned char>(b_[pos_]))) throw FormatError("expected whitespace after maxval", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
  std::size_t pos_ = 2;
};

}  // namespace

void write_ppm(std::ostream& out, std::size_t width, std::size_t height, const std::uint8_t* interleaved_rgb) {
  write_pnm(out, "P6", width, height, 3, interleaved_rgb);
}

void write_pgm(std::ostream& out, std::size_t width, std::size_t height, const std::uint8_t* gray) {
  write_pnm(out, "P5", width, height, 1, gray);
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height, const std::uint8_t* gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_pgm(out, width, height, gray);
}

Image read_pnm(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2) throw FormatError("file truncated before magic number", bytes.size());
  Image img;
  if (bytes[0] == 'P' && bytes[1] == '6') {
    img.channels = 3;
  } else if (bytes[0] == 'P' && bytes[1] == '5') {
    img.channels = 1;
  } else {
    throw FormatError("expected magic P5 or P6", 0);
  }
  HeaderParser p(bytes);
  img.width = p.number("width");
  img.height = p.number("height");
  const std::size_t maxval_at = p.pos();
  const std::size_t maxval = p.number("maxval");
  if (maxval != 255) throw FormatError("only maxval 255 is supported, got " + std::to_string(maxval), maxval_at);
  if (img.width == 0 || img.height == 0) throw FormatError("image has zero extent", maxval_at);
  p.single_whitespace();
  img.data_offset = p.pos();
  const std::size_t need = img.width * img.height * img.channels;
  if (bytes.size() - img.data_offset < need) {
    throw FormatError("truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(bytes.size() - img.data_offset),
                      bytes.size());
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(img.data_offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(img.data_offset + need));
  return img;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  try {
    return read_pnm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

// ---- clips ----

namespace {

std::string frame_name(std::size_t t) { return "frame_" + std::to_string(t) + ".ppm"; }
std::string mask_name(std::size_t t) { return "mask_" + std::to_string(t) + ".pgm"; }

struct ManifestLine {
  std::string text;
  std::size_t offset;
};

std::vector<ManifestLine> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<ManifestLine> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t end = bytes.find('\n', start);
    if (end == std::string::npos) end = bytes.size();
    lines.push_back({bytes.substr(start, end - start), start});
    start = end + 1;
  }
  return lines;
}

std::uint64_t field(const std::vector<ManifestLine>& lines, std::size_t& i, const std::string& key,
                    const std::filesystem::path& path) {
  const std::size_t at = i < lines.size() ? lines[i].offset : (lines.empty() ? 0 : lines.back().offset);
  if (i >= lines.size()) throw FormatError(path.string() + ": manifest truncated, expected '" + key + "'", at);
  std::istringstream ss(lines[i].text);
  std::string k;
  std::uint64_t v = 0;
  if (!(ss >> k >> v) || k != key) {
    throw FormatError(path.string() + ": expected '" + key + " <value>', got '" + lines[i].text + "'", at);
  }
  ++i;
  return v;
}

}  // namespace

void write_clip(const std::filesystem::path& dir, const Clip& clip) {
  std::filesystem::create_directories(dir);
  const std::size_t H = clip.height, W = clip.width, hw = H * W;
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "rsssm-clip 1\nframes " << clip.frames << "\nclasses " << clip.classes << "\nseed " << clip.seed
           << "\nheight " << H << "\nwidth " << W << "\n";
  std::vector<std::uint8_t> interleaved(3 * hw);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t k = 0; k < 3; ++k) interleaved[3 * i + k] = clip.rgb[(t * 3 + k) * hw + i];
    }
    std::ofstream f(dir / frame_name(t), std::ios::binary);
    write_ppm(f, W, H, interleaved.data());
    write_pgm(dir / mask_name(t), W, H, clip.mask.data() + t * hw);
    manifest << "frame " << t << ' ' << frame_name(t) << ' ' << mask_name(t) << "\n";
  }
  if (!manifest) throw std::runtime_error("failed writing manifest in " + dir.string());
}

Clip read_clip(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0].text != "rsssm-clip 1") throw FormatError(path.string() + ": bad manifest header", 0);
  std::size_t i = 1;
  Clip clip;
  clip.frames = field(lines, i, "frames", path);
  clip.classes = field(lines, i, "classes", path);
  clip.seed = field(lines, i, "seed", path);
  clip.height = field(lines, i, "height", path);
  clip.width = field(lines, i, "width", path);
  const std::size_t hw = clip.height * clip.width;
  clip.rgb.resize(clip.frames * 3 * hw);
  clip.mask.resize(clip.frames * hw);
  for (std::size_t t = 0; t < clip.frames; ++t, ++i) {
    if (i >= lines.size()) throw FormatError(path.string() + ": manifest lists fewer frames than declared", lines.back().offset + lines.back().text.size());
    std::istringstream ss(lines[i].text);
    std::string key, frame_file, mask_file;
    std::size_t index = 0;
    if (!(ss >> key >> index >> frame_file >> mask_file) || key != "frame" || index != t) {
      throw FormatError(path.string() + ": malformed frame line '" + lines[i].text + "'", lines[i].offset);
    }
    const auto rgb = read_pnm(dir / frame_file);
    const auto mask = read_pnm(dir / mask_file);
    if (rgb.channels != 3 || mask.channels != 1 || rgb.width != clip.width || rgb.height != clip.height ||
        mask.width != clip.width || mask.height != clip.height) {
      throw FormatError(path.string() + ": frame " + std::to_string(t) + " images do not match the declared size",
                        lines[i].offset);
    }
    for (std::size_t p = 0; p < hw; ++p) {
      for (std::size_t k = 0; k < 3; ++k) clip.rgb[(t * 3 + k) * hw + p] = rgb.pixels[3 * p + k];
      if (mask.pixels[p] >= clip.classes) {
        throw FormatError((dir / mask_file).string() + ": class id " + std::to_string(mask.pixels[p]) +
                              " outside [0, " + std::to_string(clip.classes) + ")",
                          mask.data_offset + p);
      }
    }
    std::copy(mask.pixels.begin(), mask.pixels.end(), clip.mask.begin() + static_cast<std::ptrdiff_t>(t * hw));
  }
  return clip;
}

void write_split(const std::filesystem::path& dir, const std::vector<Clip>& clips) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "clips.txt");
  if (!index) throw std::runtime_error("cannot write clip index in " + dir.string());
  index << clips.size() << "\n";
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::ostringstream name;
    name << "clip_" << std::setw(4) << std::setfill('0') << i;
    write_clip(dir / name.str(), clips[i]);
    index << name.str() << "\n";
  }
}

std::vector<Clip> read_split(const std::filesystem::path& dir) {
  const auto path = dir / "clips.txt";
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("dataset not found: " + path.string() + " does not exist (run the generate command first)");
  }
  const auto lines = read_lines(path);
  std::size_t count = 0;
  if (lines.empty() || !(std::istringstream(lines[0].text) >> count)) {
    throw FormatError(path.string() + ": expected clip count", 0);
  }
  if (lines.size() < count + 1) throw FormatError(path.string() + ": index lists fewer clips than declared", lines.back().offset);
  std::vector<Clip> clips;
  for (std::size_t i = 0; i < count; ++i) clips.push_back(read_clip(dir / lines[i + 1].text));
  return clips;
}

}  // namespace rsssm
