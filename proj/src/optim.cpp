#include "rsssm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace rsssm {

double poly_lr(double lr0, std::size_t step, std::size_t total_steps, double power) {
  if (total_steps == 0) return lr0;
  if (step >= total_steps) return 0.0;
  return lr0 * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total_steps), power);
}

template <typename T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config.lr >= 0.0) || !(config.eps > 0.0) || !(config.weight_decay >= 0.0) || config.beta1 < 0.0 ||
      config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw std::invalid_argument("invalid AdamW hyperparameters");
  }
  for (const auto& p : params_) {
    if (!p.is_leaf() || !p.requires_grad()) throw std::invalid_argument("AdamW parameters must be trainable leaves");
    m_.emplace_back(p.numel(), T(0));
    v_.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
double AdamW<T>::current_lr() const {
  return poly_lr(config_.lr, schedule_step_, config_.total_steps, config_.power);
}

template <typename T>
bool AdamW<T>::step() {
  const double lr = current_lr();
  ++schedule_step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const auto g = params_[i].grad();
    if (!std::all_of(g.begin(), g.end(), [](T v) { return std::isfinite(v); })) {
      std::clog << "warning: non-finite gradient in parameter " << i << ", skipping optimizer step "
                << schedule_step_ - 1 << "\n";
      return false;
    }
  }
  ++updates_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(updates_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(updates_));
  const T decay = static_cast<T>(1.0 - lr * config_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const auto g = params_[i].grad();
    auto p = params_[i].mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= decay;
      m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + config_.eps));
    }
  }
  return true;
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace rsssm
