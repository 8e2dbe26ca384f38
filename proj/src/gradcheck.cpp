#include "rsssm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "rsssm/loss.hpp"

namespace rsssm {

double relative_error(double analytic, double numeric, double guard) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + guard);
}

bool GradcheckReport::passed() const { return first_failure() == nullptr; }

const LeafCheck* GradcheckReport::first_failure() const {
  for (const auto& l : leaves) {
    if (!(l.worst_rel < tolerance)) return &l;
  }
  return nullptr;
}

std::vector<std::pair<std::string, double>> GradcheckReport::by_module() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& l : leaves) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == l.module; });
    if (it == out.end()) {
      out.emplace_back(l.module, l.worst_rel);
    } else {
      it->second = std::max(it->second, l.worst_rel);
    }
  }
  return out;
}

std::string module_of(const std::string& name) {
  const auto first = name.find('.');
  const std::string head = name.substr(0, first);
  if (head != "layers") return head;
  const auto second = name.find('.', first + 1);
  const auto third = name.find('.', second + 1);
  return name.substr(second + 1, third - second - 1);
}

namespace {

template <typename R>
R loss_value(const std::function<Tensor<R>()>& loss) {
  return loss().item();
}

template <typename R>
GradcheckReport run_gradcheck(const std::function<Tensor<double>()>& loss,
                              const std::vector<NamedTensor<double>>& leaves,
                              const std::function<Tensor<R>()>& reference,
                              const std::vector<NamedTensor<R>>& reference_leaves, double step, double tolerance) {
  if (reference_leaves.size() != leaves.size()) {
    throw std::invalid_argument("gradcheck: reference has a different number of leaves");
  }
  GradcheckReport report;
  report.tolerance = tolerance;
  for (auto leaf : leaves) leaf.tensor.zero_grad();
  loss().backward();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const std::vector<double> analytic = leaves[k].tensor.grad();
    auto target = reference_leaves[k].tensor;
    if (target.numel() != analytic.size()) {
      throw std::invalid_argument("gradcheck: reference leaf size differs for " + leaves[k].name);
    }
    LeafCheck check;
    check.name = leaves[k].name;
    check.module = module_of(leaves[k].name);
    auto data = target.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const R saved = data[i];
      auto at = [&](double offset) {
        data[i] = saved + static_cast<R>(offset);
        return loss_value(reference);
      };
      double numeric = 0;
      {
        NoGradGuard no_grad;
        numeric = static_cast<double>((at(step) - at(-step)) / (2 * static_cast<R>(step)));
      }
      data[i] = saved;
      double rel = relative_error(analytic[i], numeric);
      if (std::isnan(rel)) rel = std::numeric_limits<double>::infinity();
      if (check.checked == 0 || rel > check.worst_rel) {
        check.worst_rel = rel;
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
      ++check.checked;
    }
    report.leaves.push_back(check);
  }
  for (auto leaf : leaves) leaf.tensor.zero_grad();
  return report;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss, const std::vector<NamedTensor<double>>& leaves,
                          double step, double tolerance) {
  return run_gradcheck<double>(loss, leaves, loss, leaves, step, tolerance);
}

GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss, const std::vector<NamedTensor<double>>& leaves,
                          const std::function<Tensor<long double>()>& reference,
                          const std::vector<NamedTensor<long double>>& reference_leaves, double step,
                          double tolerance) {
  return run_gradcheck<long double>(loss, leaves, reference, reference_leaves, step, tolerance);
}

namespace {

struct TinyProblem {
  RsssmModel<double> model;
  Tensor<double> frames;
  LabelTensor labels;
};

TinyProblem make_problem(const ModelConfig& config, std::size_t height, std::size_t width, std::size_t frames,
                         std::uint64_t seed) {
  TinyProblem p{RsssmModel<double>::create(config, seed), {}, {}};
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> pixel(-1.0, 1.0);
  std::vector<double> x(frames * config.in_channels * height * width);
  for (auto& v : x) v = pixel(rng);
  p.frames = Tensor<double>({frames, config.in_channels, height, width}, std::move(x));
  std::uniform_int_distribution<std::int32_t> cls(0, static_cast<std::int32_t>(config.classes) - 1);
  p.labels.shape = {frames, height, width};
  p.labels.data.resize(frames * height * width);
  for (auto& v : p.labels.data) v = cls(rng);
  return p;
}

/// Long double twin of a double model, parameter values copied exactly.
RsssmModel<long double> widen(const RsssmModel<double>& model) {
  auto wide = RsssmModel<long double>::create(model.config(), 0);
  const auto src = model.parameters();
  const auto dst = wide.parameters();
  for (std::size_t k = 0; k < src.size(); ++k) {
    auto target = dst[k].tensor;
    auto out = target.mutable_data();
    const auto in = src[k].tensor.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
  return wide;
}

Tensor<long double> widen(const Tensor<double>& t) {
  const auto in = t.data();
  return Tensor<long double>(t.shape(), std::vector<long double>(in.begin(), in.end()));
}

}  // namespace

GradcheckReport gradcheck_model(const ModelConfig& config, std::size_t height, std::size_t width, std::size_t frames,
                                std::uint64_t seed, double step, double tolerance, GradcheckLoss which) {
  auto problem = make_problem(config, height, width, frames, seed);
  const LossConfig weights;
  auto loss = [&]() {
    const auto out = problem.model.forward(problem.frames, 1);
    if (which == GradcheckLoss::ChannelInfoOnly) return out.loss_ci;
    return total_loss(out.logits, problem.labels, 1, out.loss_ci, weights).total;
  };
  auto wide = widen(problem.model);
  const auto wide_frames = widen(problem.frames);
  auto reference = [&]() {
    const auto out = wide.forward(wide_frames, 1);
    if (which == GradcheckLoss::ChannelInfoOnly) return out.loss_ci;
    return total_loss(out.logits, problem.labels, 1, out.loss_ci, weights).total;
  };
  return gradcheck(loss, problem.model.parameters(), reference, wide.parameters(), step, tolerance);
}

std::vector<std::pair<std::string, double>> channel_info_gradients(const ModelConfig& config, std::size_t height,
                                                                   std::size_t width, std::size_t frames,
                                                                   std::uint64_t seed) {
  auto problem = make_problem(config, height, width, frames, seed);
  const auto out = problem.model.forward(problem.frames, 1);
  if (out.loss_ci.requires_grad()) out.loss_ci.backward();
  std::vector<std::pair<std::string, double>> result;
  for (const auto& p : problem.model.parameters()) {
    double worst = 0;
    for (double g : p.tensor.grad()) worst = std::max(worst, std::abs(g));
    result.emplace_back(p.name, worst);
  }
  return result;
}

void write_report(std::ostream& out, const GradcheckReport& report) {
  out << "leaf,module,elements,worst_rel_err,analytic,numeric\n" << std::setprecision(6);
  for (const auto& l : report.leaves) {
    out << l.name << ',' << l.module << ',' << l.checked << ',' << l.worst_rel << ',' << l.analytic << ','
        << l.numeric << '\n';
  }
  out << "\nmodule,worst_rel_err\n";
  for (const auto& [module, worst] : report.by_module()) out << module << ',' << worst << '\n';
  if (const auto* f = report.first_failure()) {
    out << "\nFAIL: leaf " << f->name << " element " << f->worst_index << " rel err " << f->worst_rel
        << " >= tolerance " << report.tolerance << '\n';
  } else {
    out << "\nPASS: every leaf within tolerance " << report.tolerance << '\n';
  }
}

}  // namespace rsssm
