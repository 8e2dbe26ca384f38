#include "rsssm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "rsssm/ssm.hpp"

namespace rsssm {

namespace {

constexpr double kRunMs = 10.0;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths, std::size_t channels, std::size_t state_dim,
                                 std::size_t repeats, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto params = SsmParams<float>::init(channels, state_dim, rng);
  DiscreteGates<float> gates;
  {
    NoGradGuard no_grad;
    gates = discretize(params);
  }
  const std::size_t width = channels * state_dim;
  const auto ab = gates.a_bar.data(), bb = gates.b_bar.data(), cc = params.c.data();
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);

  struct Case {
    std::size_t length = 0, interval = 0, forward_calls = 1, backward_calls = 1;
    std::vector<float> x, y, dy, h, checkpoints, da, db, dc, dx;
    std::vector<double> forward_ms, backward_ms;
  };
  std::vector<Case> cases(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    auto& c = cases[i];
    const std::size_t L = lengths[i];
    c.length = L;
    c.interval = detail::checkpoint_interval(L);
    c.x.resize(L * channels);
    c.y.resize(L * channels);
    c.dy.resize(L * channels);
    c.dx.resize(L * channels);
    c.h.resize(width);
    c.checkpoints.resize(((L + c.interval - 1) / c.interval) * width);
    c.da.resize(width);
    c.db.resize(width);
    c.dc.resize(width);
    for (auto& v : c.x) v = unit(rng);
    for (auto& v : c.dy) v = unit(rng);
  }

  auto forward = [&](Case& c) {
    std::fill(c.h.begin(), c.h.end(), 0.0f);
    detail::scan_forward(c.length, channels, state_dim, ab.data(), bb.data(), cc.data(), c.x.data(), c.y.data(),
                         c.h.data(), c.checkpoints.data(), c.interval);
  };
  auto backward = [&](Case& c) {
    detail::scan_backward(c.length, channels, state_dim, ab.data(), bb.data(), cc.data(), c.x.data(), c.dy.data(),
                          c.checkpoints.data(), c.interval, c.da.data(), c.db.data(), c.dc.data(), c.dx.data());
  };
  auto timed = [](std::size_t calls, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < calls; ++i) fn();
    return elapsed_ms(t0) / static_cast<double>(calls);
  };

  // Warm-up doubles as calibration: each timed run repeats the call enough
  // times to last about kRunMs, so timer jitter stays small next to it.
  const auto calls = [](double once) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kRunMs / std::max(once, 1e-6))));
  };
  for (auto& c : cases) {
    c.forward_calls = calls(timed(1, [&] { forward(c); }));
    c.backward_calls = calls(timed(1, [&] { backward(c); }));
  }
  // Lengths are interleaved within each repeat so slow drifts in machine
  // speed land on every length alike instead of skewing one ratio.
  for (std::size_t r = 0; r < repeats; ++r) {
    for (auto& c : cases) {
      c.forward_ms.push_back(timed(c.forward_calls, [&] { forward(c); }));
      c.backward_ms.push_back(timed(c.backward_calls, [&] { backward(c); }));
    }
  }

  const auto ratio = [](const std::vector<double>& num, const std::vector<double>& den) {
    std::vector<double> r(num.size());
    for (std::size_t i = 0; i < num.size(); ++i) r[i] = num[i] / den[i];
    return median(r);
  };
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    BenchRow row{c.length, channels, state_dim, median(c.forward_ms), median(c.backward_ms), 0, 0};
    if (i > 0) {
      row.forward_ratio = ratio(c.forward_ms, cases[i - 1].forward_ms);
      row.backward_ratio = ratio(c.backward_ms, cases[i - 1].backward_ms);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "L_seq,D,Ds,seconds_forward,seconds_backward\n" << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.length << ',' << r.channels << ',' << r.state_dim << ',' << r.forward_ms / 1e3 << ','
        << r.backward_ms / 1e3 << '\n';
  }
}

}  // namespace rsssm
