#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rsssm/loss.hpp"
#include "rsssm/metrics.hpp"
#include "rsssm/model.hpp"
#include "rsssm/optim.hpp"
#include "rsssm/synthdata.hpp"

namespace rsssm {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_clips = 1;
  std::uint64_t seed = 0;  // drives the clip order
  AdamWConfig optim;       // total_steps is filled from `steps` when 0
  LossConfig loss;
};

struct StepLog {
  std::size_t step = 0;
  double loss_total = 0, loss_ce_last = 0, loss_ce_sum = 0, loss_ci = 0, lr = 0;
  bool applied = true;
};

inline constexpr const char* kTrainLogHeader = "step,loss_total,loss_ce_last,loss_ce_sum,loss_ci,lr";
void write_step_csv(std::ostream& out, const StepLog& row);

/// Serial forward/backward/update over `data`, reshuffled every epoch.
/// Each row is appended to `csv` as it is produced when given.
template <typename T>
std::vector<StepLog> train_loop(RsssmModel<T>& model, const std::vector<Clip>& data, const TrainConfig& config,
                                std::ostream* csv = nullptr);

struct EvalMetrics {
  double miou = 0;
  double boundary_f = 0;
  double pixel_accuracy = 0;
  std::vector<double> class_iou;
  std::size_t clips = 0;
  std::size_t frames = 0;
};

/// Scores every frame of every clip against its mask. `streaming` runs
/// clips one at a time in order and carries the scan states across them
/// instead of restarting each clip from zero.
template <typename T>
EvalMetrics eval_loop(const RsssmModel<T>& model, const std::vector<Clip>& data, std::size_t batch_clips = 1,
                      bool streaming = false);

void write_metrics_text(std::ostream& out, const EvalMetrics& m);
void write_metrics_csv(std::ostream& out, const EvalMetrics& m);

}  // namespace rsssm
