#include "rsssm/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace rsssm {

void write_step_csv(std::ostream& out, const StepLog& row) {
  out << row.step << ',' << std::setprecision(10) << row.loss_total << ',' << row.loss_ce_last << ','
      << row.loss_ce_sum << ',' << row.loss_ci << ',' << row.lr << '\n';
}

template <typename T>
std::vector<StepLog> train_loop(RsssmModel<T>& model, const std::vector<Clip>& data, const TrainConfig& config,
                                std::ostream* csv) {
  if (data.empty()) throw std::runtime_error("training needs at least one clip");
  if (config.batch_clips == 0) throw std::invalid_argument("batch_clips must be positive");
  config.loss.validate();

  std::vector<Tensor<T>> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  AdamWConfig oc = config.optim;
  if (oc.total_steps == 0) oc.total_steps = config.steps;
  AdamW<T> opt(std::move(params), oc);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  auto next_clip = [&]() -> const Clip* {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return &data[order[cursor++]];
  };

  if (csv) *csv << kTrainLogHeader << '\n';
  std::vector<StepLog> log;
  log.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<const Clip*> batch;
    for (std::size_t b = 0; b < config.batch_clips; ++b) batch.push_back(next_clip());
    const auto out = model.forward(batch_frames<T>(batch), batch.size());
    const auto terms = total_loss(out.logits, batch_labels(batch), batch.size(), out.loss_ci, config.loss);

    StepLog row;
    row.step = step;
    row.lr = opt.current_lr();
    row.loss_total = terms.total.item();
    row.loss_ce_last = terms.ce_last.item();
    row.loss_ce_sum = terms.ce_sum.item();
    row.loss_ci = terms.ci.item();
    terms.total.backward();
    row.applied = opt.step();
    opt.zero_grad();
    if (csv) write_step_csv(*csv, row);
    log.push_back(row);
  }
  return log;
}

template <typename T>
EvalMetrics eval_loop(const RsssmModel<T>& model, const std::vector<Clip>& data, std::size_t batch_clips,
                      bool streaming) {
  if (data.empty()) throw std::runtime_error("evaluation needs at least one clip");
  if (batch_clips == 0) throw std::invalid_argument("batch_clips must be positive");
  NoGradGuard no_grad;
  ConfusionMatrix cm(model.config().classes);
  BoundaryScore boundary(2.0);
  EvalMetrics m;
  StreamState<T> carry;
  if (streaming) batch_clips = 1;
  for (std::size_t i = 0; i < data.size(); i += batch_clips) {
    std::vector<const Clip*> batch;
    for (std::size_t j = i; j < std::min(data.size(), i + batch_clips); ++j) batch.push_back(&data[j]);
    const auto out = model.forward(batch_frames<T>(batch), batch.size(), streaming ? &carry : nullptr);
    const auto pred = predict_labels(out.logits);
    const auto labels = batch_labels(batch);
    cm.add(pred.data, labels.data);
    const std::size_t H = labels.shape[1], W = labels.shape[2];
    for (std::size_t f = 0; f < labels.shape[0]; ++f) {
      const std::span<const std::int32_t> p(pred.data.data() + f * H * W, H * W);
      const std::span<const std::int32_t> y(labels.data.data() + f * H * W, H * W);
      boundary.add(p, y, H, W);
    }
    m.clips += batch.size();
    m.frames += labels.shape[0];
  }
  m.miou = cm.miou();
  m.boundary_f = boundary.f_score();
  m.pixel_accuracy = cm.pixel_accuracy();
  m.class_iou = cm.iou();
  return m;
}

void write_metrics_text(std::ostream& out, const EvalMetrics& m) {
  out << std::setprecision(10) << "clips " << m.clips << "\nframes " << m.frames << "\nmiou " << m.miou
      << "\nboundary_f " << m.boundary_f << "\npixel_accuracy " << m.pixel_accuracy << '\n';
  for (std::size_t k = 0; k < m.class_iou.size(); ++k) out << "iou_class_" << k << ' ' << m.class_iou[k] << '\n';
}

void write_metrics_csv(std::ostream& out, const EvalMetrics& m) {
  out << "metric,value\n" << std::setprecision(10) << "miou," << m.miou << "\nboundary_f," << m.boundary_f
      << "\npixel_accuracy," << m.pixel_accuracy << '\n';
  for (std::size_t k = 0; k < m.class_iou.size(); ++k) out << "iou_class_" << k << ',' << m.class_iou[k] << '\n';
}

#define RSSSM_INSTANTIATE_TRAIN(T)                                                                        \
  template std::vector<StepLog> train_loop(RsssmModel<T>&, const std::vector<Clip>&, const TrainConfig&, \
                                           std::ostream*);                                               \
  template EvalMetrics eval_loop(const RsssmModel<T>&, const std::vector<Clip>&, std::size_t, bool);

RSSSM_INSTANTIATE_TRAIN(float)
RSSSM_INSTANTIATE_TRAIN(double)

}  // namespace rsssm
