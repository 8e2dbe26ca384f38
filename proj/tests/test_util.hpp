#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rsssm/tensor.hpp"

namespace rsssm::testing {

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& e : v) e = u(rng);
  return Tensor<double>(shape, std::move(v), requires_grad);
}

/// Central-difference gradient of a scalar function w.r.t. every element
/// of `leaf`.
inline std::vector<double> numeric_grad(const std::function<double()>& f, Tensor<double> leaf, double h = 1e-5) {
  auto data = leaf.mutable_data();
  std::vector<double> g(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + h;
    const double plus = f();
    data[i] = saved - h;
    const double minus = f();
    data[i] = saved;
    g[i] = (plus - minus) / (2 * h);
  }
  return g;
}

/// Largest |a - n| / (|a| + |n| + 1e-8) over two gradient vectors.
inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / (std::abs(a[i]) + std::abs(b[i]) + 1e-8));
  }
  return worst;
}

/// Runs backward on `loss()` and compares every leaf's gradient with
/// finite differences. Returns the worst relative difference.
inline double check_grads(const std::function<Tensor<double>()>& loss, const std::vector<Tensor<double>>& leaves,
                          double h = 1e-5) {
  for (auto l : leaves) l.zero_grad();
  loss().backward();
  double worst = 0;
  for (auto l : leaves) {
    const auto analytic = l.grad();
    const auto numeric = numeric_grad([&] { return loss().item(); }, l, h);
    worst = std::max(worst, max_rel_diff(analytic, numeric));
  }
  return worst;
}

}  // namespace rsssm::testing
