// Command-line entry point: one binary, one subcommand per task.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rsssm/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
  std::optional<std::size_t> steps;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<std::string> checkpoint;
  bool detach_spectrum = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "model and data-order seed");
  cmd->add_option("--precision", f.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--steps", f.steps, "training steps");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--variant", f.variant, "V-SSM, Bi-V-SSM, No-CwAP or RS-SSM");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint to read (default <out>/model.ckpt)");
  cmd->add_flag("--detach-spectrum", f.detach_spectrum, "stop gradients at the spectrum features");
  cmd->add_option("--set", f.overrides, "extra key=value override, repeatable");
}

rsssm::RunConfig resolve(const Flags& f) {
  rsssm::RunConfig c = f.config.empty() ? rsssm::RunConfig{} : rsssm::load_config(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw rsssm::ConfigError("--set", 0, kv, "expected key=value");
    c.set(kv.substr(0, eq), kv.substr(eq + 1), "--set");
  }
  if (f.seed) c.seed = *f.seed;
  if (f.precision) c.set("precision", *f.precision, "--precision");
  if (f.steps) c.train.steps = *f.steps;
  if (f.out) c.out = *f.out;
  if (f.variant) c.set("model.variant", *f.variant, "--variant");
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.detach_spectrum) c.model.detach_spectrum = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RS-SSM video segmentation toolkit"};
  app.require_subcommand(1);
  Flags flags;
  using Command = int (*)(const rsssm::RunConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"generate", "write the synthetic train/eval clips", rsssm::cmd_generate},
      {"train", "train a model and save a checkpoint", rsssm::cmd_train},
      {"eval", "score a checkpoint on the eval clips", rsssm::cmd_eval},
      {"gradcheck", "compare backward with finite differences", rsssm::cmd_gradcheck},
      {"bench", "time the scan across sequence lengths", rsssm::cmd_bench},
      {"ablate", "train and score all four variants over several seeds", rsssm::cmd_ablate},
      {"inspect-gates", "heatmaps of the forgetting and updating gates", rsssm::cmd_inspect_gates},
      {"inspect-spectrum", "per-channel spectrum features and band masks", rsssm::cmd_inspect_spectrum},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    subs.emplace_back(sub, fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rsssm::kExitOk : rsssm::kExitUsage;
  }

  try {
    const auto config = resolve(flags);
    for (const auto& [sub, fn] : subs) {
      if (sub->parsed()) return fn(config, std::cout);
    }
  } catch (const rsssm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rsssm::kExitUsage;
  } catch (const rsssm::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return rsssm::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rsssm::kExitUsage;
  }
  return rsssm::kExitUsage;
}
