#pragma once

#include <cstddef>
#include <vector>

#include "rsssm/tensor.hpp"

namespace rsssm {

struct AdamWConfig {
  double lr = 6e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t total_steps = 0;  // poly schedule horizon; 0 keeps lr constant
  double power = 1.0;
};

/// lr0 * (1 - t / t_max)^power, clamped at 0 past the horizon.
double poly_lr(double lr0, std::size_t step, std::size_t total_steps, double power = 1.0);

/// AdamW with decoupled weight decay and a poly learning-rate schedule.
/// Parameters without a gradient are left untouched.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWConfig config);

  /// Applies one update from the accumulated gradients. A non-finite
  /// gradient skips the update (with a warning) and returns false; the
  /// schedule still advances.
  bool step();
  void zero_grad();

  double current_lr() const;
  std::size_t schedule_step() const { return schedule_step_; }
  std::size_t updates() const { return updates_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamWConfig config_;
  std::vector<std::vector<T>> m_, v_;
  std::size_t schedule_step_ = 0;
  std::size_t updates_ = 0;
};

}  // namespace rsssm
