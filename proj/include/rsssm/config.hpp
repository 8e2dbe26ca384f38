#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsssm/model.hpp"
#include "rsssm/synthdata.hpp"
#include "rsssm/train.hpp"

namespace rsssm {

/// Bad config input. `line` is 1-based, 0 when the problem has no line
/// (a flag override, for instance).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& key, const std::string& what);

  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

enum class Precision { F32, F64 };
std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view text);

struct DataConfig {
  std::filesystem::path dir = "data";
  std::uint64_t seed = 1234;
  std::size_t train_clips = 200;
  std::size_t eval_clips = 50;
  SceneSpec scene;  // seed field unused; clip seeds derive from `seed`
};

struct BenchConfig {
  std::vector<std::size_t> lengths = {1024, 2048, 4096, 8192};
  std::size_t repeats = 5;
  std::size_t channels = 32;
  std::size_t state_dim = 8;
  double max_ratio = 2.5;
};

/// The gradient check runs a shrunken copy of the model config: these
/// sizes replace its width and state size.
struct GradcheckConfig {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t height = 8, width = 8, frames = 2;
  std::size_t embed_dim = 4, state_dim = 2;
};

/// Everything one run needs. Written verbatim into the output directory
/// before any work starts.
struct RunConfig {
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  std::filesystem::path out = "run";
  std::filesystem::path checkpoint;  // eval / inspect input; empty means <out>/model.ckpt
  ModelConfig model;
  TrainConfig train;
  std::size_t eval_batch_clips = 1;
  bool eval_streaming = false;  // carry scan states across eval clips
  DataConfig data;
  BenchConfig bench;
  GradcheckConfig gradcheck;
  std::vector<std::uint64_t> ablate_seeds = {0, 1, 2};

  /// Sets one key; `line` feeds error messages.
  void set(const std::string& key, const std::string& value, const std::string& source = "<override>",
           std::size_t line = 0);
  void validate() const;
  /// key=value text that parses back to an identical config.
  std::string serialize() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and bad
/// values throw ConfigError naming the line and key.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>", RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// The sizes used for the desk-scale ablation and the bundled example config.
RunConfig ablation_defaults();

}  // namespace rsssm
