#pragma once

#include <iosfwd>

#include "rsssm/config.hpp"

namespace rsssm {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2 };

/// Creates `config.out` and writes config.txt there. Every command calls
/// this before doing any work.
void prepare_output(const RunConfig& config);

/// Reads <data.dir>/<split>; when `generate_if_missing` is set and the split
/// is absent, generates it in memory from data.seed instead.
std::vector<Clip> load_split(const DataConfig& data, const std::string& split, bool generate_if_missing);
std::vector<Clip> generate_split(const DataConfig& data, const std::string& split);

int cmd_generate(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_gradcheck(const RunConfig& config, std::ostream& log);
int cmd_bench(const RunConfig& config, std::ostream& log);
int cmd_ablate(const RunConfig& config, std::ostream& log);
int cmd_inspect_gates(const RunConfig& config, std::ostream& log);
int cmd_inspect_spectrum(const RunConfig& config, std::ostream& log);

}  // namespace rsssm
