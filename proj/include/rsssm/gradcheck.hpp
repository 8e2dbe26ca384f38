#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rsssm/model.hpp"

namespace rsssm {

struct LeafCheck {
  std::string name;
  std::string module;
  std::size_t checked = 0;
  double worst_rel = 0;
  std::size_t worst_index = 0;
  double analytic = 0;  // at worst_index
  double numeric = 0;
};

struct GradcheckReport {
  double tolerance = 0;
  std::vector<LeafCheck> leaves;

  bool passed() const;
  /// First leaf over tolerance, or nullptr.
  const LeafCheck* first_failure() const;
  /// Worst relative error per module, in first-seen order.
  std::vector<std::pair<std::string, double>> by_module() const;
};

/// |a - n| / (|a| + |n| + guard).
double relative_error(double analytic, double numeric, double guard = 1e-8);

/// Compares the backward pass of `loss` against central differences for
/// every element of every leaf. `loss` must rebuild the graph on each call.
GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          const std::vector<NamedTensor<double>>& leaves, double step, double tolerance);

/// Same, but the differences are taken on `reference`, a long double copy
/// of the objective whose leaves mirror `leaves` element for element. The
/// analytic side stays 64-bit; the wider reference keeps round-off in the
/// difference quotient far below the tolerance for gradients near 1e-8.
GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          const std::vector<NamedTensor<double>>& leaves,
                          const std::function<Tensor<long double>()>& reference,
                          const std::vector<NamedTensor<long double>>& reference_leaves, double step,
                          double tolerance);

enum class GradcheckLoss { Total, ChannelInfoOnly };

/// Builds a small model and clip and checks the full objective (or L_ci
/// alone) against central differences for every parameter.
GradcheckReport gradcheck_model(const ModelConfig& config, std::size_t height, std::size_t width,
                                std::size_t frames, std::uint64_t seed, double step, double tolerance,
                                GradcheckLoss which = GradcheckLoss::Total);

/// Largest |dL_ci/dw| per parameter, L_ci alone. All zero when the
/// spectrum branch is detached or the variant has no spectrum features.
std::vector<std::pair<std::string, double>> channel_info_gradients(const ModelConfig& config, std::size_t height,
                                                                   std::size_t width, std::size_t frames,
                                                                   std::uint64_t seed);

/// Module label of a parameter name ("layers.0.fuse.w1" -> "fuse").
std::string module_of(const std::string& name);

void write_report(std::ostream& out, const GradcheckReport& report);

}  // namespace rsssm
