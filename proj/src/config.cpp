#include "rsssm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>

namespace rsssm {

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& key, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) +
                         (key.empty() ? std::string() : ": key '" + key + "'") + ": " + what),
      line_(line),
      key_(key) {}

std::string_view precision_name(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::F32;
  if (text == "f64") return Precision::F64;
  throw std::invalid_argument("precision must be f32 or f64, got '" + std::string(text) + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& v) {
  N out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

template <typename N>
std::vector<N> parse_list(const std::string& v) {
  std::vector<N> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<N>(trim(item)));
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return o.str();
}

template <typename N>
std::string fmt_list(const std::vector<N>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<N>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RSSSM_SIZE(name, member)                                                        \
  Field {                                                                               \
    name, [](RunConfig& c, const std::string& v) { c.member = parse_number<std::size_t>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                     \
  }
#define RSSSM_U64(name, member)                                                           \
  Field {                                                                                 \
    name, [](RunConfig& c, const std::string& v) { c.member = parse_number<std::uint64_t>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                       \
  }
#define RSSSM_DOUBLE(name, member)                                                    \
  Field {                                                                             \
    name, [](RunConfig& c, const std::string& v) { c.member = parse_number<double>(v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                              \
  }
#define RSSSM_BOOL(name, member)                                                  \
  Field {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.member = parse_bool(v); },   \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }
#define RSSSM_PATH(name, member)                                                 \
  Field {                                                                        \
    name, [](RunConfig& c, const std::string& v) { c.member = v; },              \
        [](const RunConfig& c) { return c.member.string(); }                     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RSSSM_U64("seed", seed),
      {"precision", [](RunConfig& c, const std::string& v) { c.precision = parse_precision(v); },
       [](const RunConfig& c) { return std::string(precision_name(c.precision)); }},
      RSSSM_PATH("out", out),
      RSSSM_PATH("checkpoint", checkpoint),

      RSSSM_SIZE("model.layers", model.layers),
      RSSSM_SIZE("model.embed_dim", model.embed_dim),
      RSSSM_SIZE("model.state_dim", model.state_dim),
      RSSSM_SIZE("model.bands", model.bands),
      RSSSM_SIZE("model.high_bands", model.high_bands),
      RSSSM_SIZE("model.patch", model.patch),
      {"model.variant", [](RunConfig& c, const std::string& v) { c.model.variant = parse_variant(v); },
       [](const RunConfig& c) { return std::string(variant_name(c.model.variant)); }},
      RSSSM_BOOL("model.detach_spectrum", model.detach_spectrum),
      RSSSM_DOUBLE("model.eps", model.fgir.eps),
      {"model.invert_axis",
       [](RunConfig& c, const std::string& v) {
         if (v == "channels") {
           c.model.fgir.axis = InvertAxis::Channels;
         } else if (v == "state") {
           c.model.fgir.axis = InvertAxis::StateDims;
         } else {
           throw std::invalid_argument("expected channels or state, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.model.fgir.axis == InvertAxis::Channels ? "channels" : "state"); }},
      {"model.force_alpha",
       [](RunConfig& c, const std::string& v) {
         if (v == "none") {
           c.model.fgir.force_alpha.reset();
         } else {
           c.model.fgir.force_alpha = parse_number<double>(v);
         }
       },
       [](const RunConfig& c) {
         return c.model.fgir.force_alpha ? fmt(*c.model.fgir.force_alpha) : std::string("none");
       }},

      RSSSM_DOUBLE("loss.lambda", train.loss.lambda),
      RSSSM_DOUBLE("loss.lambda_i", train.loss.lambda_i),

      RSSSM_SIZE("train.steps", train.steps),
      RSSSM_SIZE("train.batch_clips", train.batch_clips),
      RSSSM_DOUBLE("train.lr", train.optim.lr),
      RSSSM_DOUBLE("train.weight_decay", train.optim.weight_decay),
      RSSSM_DOUBLE("train.beta1", train.optim.beta1),
      RSSSM_DOUBLE("train.beta2", train.optim.beta2),
      RSSSM_DOUBLE("train.adam_eps", train.optim.eps),
      RSSSM_DOUBLE("train.poly_power", train.optim.power),
      RSSSM_SIZE("eval.batch_clips", eval_batch_clips),
      RSSSM_BOOL("eval.streaming", eval_streaming),

      RSSSM_PATH("data.dir", data.dir),
      RSSSM_U64("data.seed", data.seed),
      RSSSM_SIZE("data.train_clips", data.train_clips),
      RSSSM_SIZE("data.eval_clips", data.eval_clips),
      RSSSM_SIZE("data.height", data.scene.height),
      RSSSM_SIZE("data.width", data.scene.width),
      RSSSM_SIZE("data.classes", data.scene.classes),
      RSSSM_SIZE("data.trajectory", data.scene.trajectory),
      {"data.offsets", [](RunConfig& c, const std::string& v) { c.data.scene.offsets = parse_list<int>(v); },
       [](const RunConfig& c) { return fmt_list(c.data.scene.offsets); }},
      RSSSM_SIZE("data.shapes", data.scene.shape_count),
      RSSSM_DOUBLE("data.max_speed", data.scene.max_speed),
      RSSSM_DOUBLE("data.max_deform", data.scene.max_deform),
      RSSSM_DOUBLE("data.min_radius", data.scene.min_radius),
      RSSSM_DOUBLE("data.max_radius", data.scene.max_radius),
      RSSSM_BOOL("data.occlusion", data.scene.occlusion),
      RSSSM_DOUBLE("data.min_boundary_density", data.scene.min_boundary_density),
      {"data.texture_freq",
       [](RunConfig& c, const std::string& v) {
         c.data.scene.texture_freq = v == "default" ? std::vector<double>{} : parse_list<double>(v);
       },
       [](const RunConfig& c) {
         return c.data.scene.texture_freq.empty() ? std::string("default") : fmt_list(c.data.scene.texture_freq);
       }},

      {"bench.lengths", [](RunConfig& c, const std::string& v) { c.bench.lengths = parse_list<std::size_t>(v); },
       [](const RunConfig& c) { return fmt_list(c.bench.lengths); }},
      RSSSM_SIZE("bench.repeats", bench.repeats),
      RSSSM_SIZE("bench.channels", bench.channels),
      RSSSM_SIZE("bench.state_dim", bench.state_dim),
      RSSSM_DOUBLE("bench.max_ratio", bench.max_ratio),

      RSSSM_DOUBLE("gradcheck.step", gradcheck.step),
      RSSSM_DOUBLE("gradcheck.tolerance", gradcheck.tolerance),
      RSSSM_SIZE("gradcheck.height", gradcheck.height),
      RSSSM_SIZE("gradcheck.width", gradcheck.width),
      RSSSM_SIZE("gradcheck.frames", gradcheck.frames),
      RSSSM_SIZE("gradcheck.embed_dim", gradcheck.embed_dim),
      RSSSM_SIZE("gradcheck.state_dim", gradcheck.state_dim),

      {"ablate.seeds", [](RunConfig& c, const std::string& v) { c.ablate_seeds = parse_list<std::uint64_t>(v); },
       [](const RunConfig& c) { return fmt_list(c.ablate_seeds); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value, const std::string& source, std::size_t line) {
  for (const auto& f : fields()) {
    if (key != f.key) continue;
    try {
      f.set(*this, value);
    } catch (const std::exception& e) {
      throw ConfigError(source, line, key, e.what());
    }
    if (key == "data.classes") model.classes = data.scene.classes;
    return;
  }
  throw ConfigError(source, line, key, "unknown key");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) { throw ConfigError("<config>", 0, key, what); };
  if (model.layers == 0) fail("model.layers", "must be positive");
  if (model.embed_dim == 0) fail("model.embed_dim", "must be positive");
  if (model.state_dim == 0) fail("model.state_dim", "must be positive");
  if (model.patch == 0) fail("model.patch", "must be positive");
  if (model.bands < 2) fail("model.bands", "need at least 2 bands");
  if (model.high_bands < 1 || model.high_bands >= model.bands) fail("model.high_bands", "must be in [1, bands)");
  if (!(model.fgir.eps > 0.0)) fail("model.eps", "must be positive");
  if (model.fgir.force_alpha && (*model.fgir.force_alpha < 0.0 || *model.fgir.force_alpha > 1.0)) {
    fail("model.force_alpha", "must be in [0, 1] or none");
  }
  if (model.classes != data.scene.classes) fail("data.classes", "model and data class counts disagree");
  if (train.batch_clips == 0) fail("train.batch_clips", "must be positive");
  if (eval_batch_clips == 0) fail("eval.batch_clips", "must be positive");
  if (!(train.optim.lr >= 0.0)) fail("train.lr", "must be non-negative");
  if (train.loss.lambda < 0.0) fail("loss.lambda", "must be non-negative");
  if (train.loss.lambda_i < 0.0) fail("loss.lambda_i", "must be non-negative");
  if (data.scene.height % model.patch || data.scene.width % model.patch) {
    fail("model.patch", "must divide data.height and data.width");
  }
  if (bench.lengths.empty() || bench.repeats == 0) fail("bench.lengths", "need at least one length and repeat");
  if (ablate_seeds.empty()) fail("ablate.seeds", "need at least one seed");
  try {
    data.scene.validate();
  } catch (const SpecError& e) {
    fail("data", e.what());
  }
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) {
    const std::string value = f.get(*this);
    if (!value.empty()) out += std::string(f.key) + " = " + value + "\n";  // unset keys reload as defaults
  }
  return out;
}

RunConfig parse_config(std::istream& in, const std::string& source, RunConfig base) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "", "expected 'key = value', got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line, "", "missing key before '='");
    if (value.empty()) throw ConfigError(source, line, key, "missing value");
    base.set(key, value, source, line);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "", "cannot open config file");
  return parse_config(in, path.string());
}

RunConfig ablation_defaults() {
  RunConfig c;
  c.model.embed_dim = 32;
  c.model.state_dim = 8;
  c.model.layers = 2;
  c.train.optim.lr = 1e-3;
  c.train.steps = 2000;
  return c;
}

}  // namespace rsssm
