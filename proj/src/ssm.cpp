#include "rsssm/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "rsssm/ops.hpp"

namespace rsssm {

template <typename T>
Tensor<T> SsmParams<T>::A() const {
  return -exp(a_log);
}

template <typename T>
Tensor<T> SsmParams<T>::delta() const {
  return softplus(dt_raw);
}

template <typename T>
SsmParams<T> SsmParams<T>::init(std::size_t channels, std::size_t state_dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a_log(std::log(0.5), std::log(8.0));
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  std::normal_distribution<double> gain(0.0, 1.0 / std::sqrt(static_cast<double>(state_dim)));
  const std::size_t n = channels * state_dim;
  std::vector<T> a(n), b(n), c(n), dt(channels);
  for (auto& v : a) v = static_cast<T>(a_log(rng));
  for (auto& v : b) v = static_cast<T>(gain(rng));
  for (auto& v : c) v = static_cast<T>(gain(rng));
  for (auto& v : dt) {
    const double d = std::exp(log_dt(rng));
    v = static_cast<T>(d + std::log(-std::expm1(-d)));  // softplus^-1
  }
  SsmParams p;
  p.a_log = Tensor<T>({channels, state_dim}, std::move(a), true);
  p.b = Tensor<T>({channels, state_dim}, std::move(b), true);
  p.c = Tensor<T>({channels, state_dim}, std::move(c), true);
  p.dt_raw = Tensor<T>({channels}, std::move(dt), true);
  return p;
}

template <typename T>
DiscreteGates<T> discretize(const Tensor<T>& A, const Tensor<T>& delta, const Tensor<T>& B) {
  if (A.rank() != 2 || B.shape() != A.shape() || delta.rank() != 1 || delta.dim(0) != A.dim(0)) {
    throw ShapeError("discretize needs A [D x Ds], delta [D], B [D x Ds]; got " +
                     shape_str(A.shape()) + ", " + shape_str(delta.shape()) + ", " +
                     shape_str(B.shape()));
  }
  for (std::size_t i = 0; i < A.numel(); ++i) {
    if (!(A.data()[i] < T(0))) {
      throw NumericError("discretize: A must be strictly negative, entry " + std::to_string(i) +
                         " is " + std::to_string(A.data()[i]));
    }
  }
  for (std::size_t i = 0; i < delta.numel(); ++i) {
    if (!(delta.data()[i] > T(0))) {
      throw NumericError("discretize: time step must be positive, channel " + std::to_string(i) +
                         " is " + std::to_string(delta.data()[i]));
    }
  }
  const Tensor<T> step = reshape(delta, {delta.dim(0), 1});
  const Tensor<T> scaled = A * step;
  return {exp(scaled), expm1_ratio(scaled) * (step * B)};
}

template <typename T>
DiscreteGates<T> discretize(const SsmParams<T>& params, const std::optional<Tensor<T>>& gate_override) {
  if (gate_override && gate_override->shape() != params.b.shape()) {
    throw ShapeError("gate override " + shape_str(gate_override->shape()) +
                     " does not match parameters " + shape_str(params.b.shape()));
  }
  return discretize(gate_override ? *gate_override : params.A(), params.delta(), params.b);
}

template <typename T>
Tensor<T> flatten_tokens(const Tensor<T>& maps) {
  if (maps.rank() != 4) throw ShapeError("flatten_tokens needs [T x D x Hs x Ws], got " + shape_str(maps.shape()));
  const std::size_t frames = maps.dim(0), d = maps.dim(1), rows = maps.dim(2), cols = maps.dim(3);
  return reshape(permute(maps, {0, 2, 3, 1}), {frames * rows * cols, d});
}

template <typename T>
Tensor<T> unflatten_tokens(const Tensor<T>& tokens, std::size_t frames, std::size_t rows, std::size_t cols) {
  if (tokens.rank() != 2 || tokens.dim(0) != frames * rows * cols) {
    throw ShapeError("unflatten_tokens: " + shape_str(tokens.shape()) + " is not [" +
                     std::to_string(frames * rows * cols) + " x D]");
  }
  const std::size_t d = tokens.dim(1);
  return permute(reshape(tokens, {frames, rows, cols, d}), {0, 3, 1, 2});
}

namespace detail {

std::size_t checkpoint_interval(std::size_t length) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(length)))));
}

template <typename T>
void scan_forward(std::size_t length, std::size_t channels, std::size_t state_dim, const T* a_bar,
                  const T* b_bar, const T* c, const T* x, T* y, T* h, T* checkpoints,
                  std::size_t interval) {
  const std::size_t width = channels * state_dim;
  for (std::size_t t = 0; t < length; ++t) {
    if (checkpoints && t % interval == 0) std::copy_n(h, width, checkpoints + (t / interval) * width);
    const T* xt = x + t * channels;
    T* yt = y + t * channels;
    for (std::size_t d = 0; d < channels; ++d) {
      const std::size_t row = d * state_dim;
      const T xd = xt[d];
      T acc = T(0);
      for (std::size_t s = 0; s < state_dim; ++s) {
        const T hn = a_bar[row + s] * h[row + s] + b_bar[row + s] * xd;
        h[row + s] = hn;
        acc += c[row + s] * hn;
      }
      yt[d] = acc;
    }
  }
}

template <typename T>
void scan_backward(std::size_t length, std::size_t channels, std::size_t state_dim, const T* a_bar,
                   const T* b_bar, const T* c, const T* x, const T* dy, const T* checkpoints,
                   std::size_t interval, T* d_a_bar, T* d_b_bar, T* d_c, T* dx) {
  const std::size_t width = channels * state_dim;
  const std::size_t chunks = (length + interval - 1) / interval;
  // Gates, the adjoint carry and the three gradient sums live in one block,
  // each row padded by a cache line so no two streams share an address
  // modulo the page size (which stalls loads behind unrelated stores).
  const std::size_t pitch = width + 64 / sizeof(T);
  std::vector<T> block(7 * pitch, T(0));
  T* const ga = block.data();
  T* const gb = ga + pitch;
  T* const gc = gb + pitch;
  T* const carry = gc + pitch;  // a_bar * lambda_{t+1}
  T* const da = carry + pitch;
  T* const db = da + pitch;
  T* const dc = db + pitch;
  std::copy_n(a_bar, width, ga);
  std::copy_n(b_bar, width, gb);
  std::copy_n(c, width, gc);
  const std::size_t state_pitch = width + 64 / sizeof(T);
  std::vector<T> states((interval + 1) * state_pitch);
  std::vector<T> scratch(interval * channels);
  for (std::size_t k = chunks; k-- > 0;) {
    const std::size_t t0 = k * interval;
    const std::size_t t1 = std::min(length, t0 + interval);
    // states[i] is the state before token t0 + i
    std::copy_n(checkpoints + k * width, width, states.data());
    for (std::size_t i = 0; i < t1 - t0; ++i) {
      T* next = states.data() + (i + 1) * state_pitch;
      std::copy_n(states.data() + i * state_pitch, width, next);
      scan_forward<T>(1, channels, state_dim, ga, gb, gc, x + (t0 + i) * channels, scratch.data() + i * channels,
                      next, static_cast<T*>(nullptr), interval);
    }
    for (std::size_t t = t1; t-- > t0;) {
      const T* prev = states.data() + (t - t0) * state_pitch;
      const T* cur = prev + state_pitch;
      const T* dyt = dy + t * channels;
      const T* xt = x + t * channels;
      T* dxt = dx + t * channels;
      for (std::size_t d = 0; d < channels; ++d) {
        const std::size_t row = d * state_dim;
        const T g = dyt[d];
        const T xd = xt[d];
        T acc = T(0);
        for (std::size_t s = 0; s < state_dim; ++s) {
          const std::size_t j = row + s;
          const T lambda = gc[j] * g + carry[j];
          dc[j] += g * cur[j];
          da[j] += lambda * prev[j];
          db[j] += lambda * xd;
          acc += lambda * gb[j];
          carry[j] = ga[j] * lambda;
        }
        dxt[d] += acc;
      }
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    d_a_bar[j] += da[j];
    d_b_bar[j] += db[j];
    d_c[j] += dc[j];
  }
}

}  // namespace detail

template <typename T>
ScanResult<T> scan(const DiscreteGates<T>& gates, const Tensor<T>& C, const Tensor<T>& x,
                   const std::optional<ScanState<T>>& h0) {
  const Shape& gs = gates.a_bar.shape();
  if (gs.size() != 2 || gates.b_bar.shape() != gs || C.shape() != gs) {
    throw ShapeError("scan gates/C must share one [D x Ds] shape; got " + shape_str(gs) + ", " +
                     shape_str(gates.b_bar.shape()) + ", " + shape_str(C.shape()));
  }
  const std::size_t channels = gs[0], state_dim = gs[1];
  if ((x.rank() != 2 && x.rank() != 3) || x.dim(-1) != channels) {
    throw ShapeError("scan input must be [L x " + std::to_string(channels) + "] or [B x L x " +
                     std::to_string(channels) + "], got " + shape_str(x.shape()) +
                     " against gates " + shape_str(gs));
  }
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t length = x.dim(-2);
  const std::size_t width = channels * state_dim;

  std::vector<T> h(batch * width, T(0));
  if (h0) {
    if (h0->h.numel() != h.size()) {
      throw ShapeError("initial state " + shape_str(h0->h.shape()) + " does not match batch " +
                       std::to_string(batch) + " x " + shape_str(gs));
    }
    std::copy(h0->h.data().begin(), h0->h.data().end(), h.begin());
  }

  const bool track = grad_enabled() && (gates.a_bar.requires_grad() || gates.b_bar.requires_grad() ||
                                        C.requires_grad() || x.requires_grad());
  const std::size_t interval = detail::checkpoint_interval(length);
  const std::size_t chunks = (length + interval - 1) / interval;
  auto checkpoints = track ? std::make_shared<std::vector<T>>(batch * chunks * width) : nullptr;

  std::vector<T> y(x.numel());
  const auto ab = gates.a_bar.data();
  const auto bb = gates.b_bar.data();
  const auto cc = C.data();
  const auto xs = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    detail::scan_forward(length, channels, state_dim, ab.data(), bb.data(), cc.data(),
                         xs.data() + b * length * channels, y.data() + b * length * channels,
                         h.data() + b * width,
                         checkpoints ? checkpoints->data() + b * chunks * width : nullptr, interval);
  }

  auto out = make_result<T>(
      x.shape(), std::move(y), "scan", {gates.a_bar, gates.b_bar, C, x},
      [=](Node<T>& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        auto& nc = *self.inputs[2];
        auto& nx = *self.inputs[3];
        std::vector<T> da(width, T(0)), db(width, T(0)), dc(width, T(0));
        std::vector<T> dx(nx.data.size(), T(0));
        for (std::size_t b = 0; b < batch; ++b) {
          detail::scan_backward(length, channels, state_dim, na.data.data(), nb.data.data(),
                                nc.data.data(), nx.data.data() + b * length * channels,
                                self.grad.data() + b * length * channels,
                                checkpoints->data() + b * chunks * width, interval, da.data(),
                                db.data(), dc.data(), dx.data() + b * length * channels);
        }
        accumulate<T>(na, da);
        accumulate<T>(nb, db);
        accumulate<T>(nc, dc);
        accumulate<T>(nx, dx);
      });

  ScanState<T> final_state{Tensor<T>({batch, channels, state_dim}, std::move(h)),
                           (h0 ? h0->position : 0) + length};
  return {out, final_state};
}

#define RSSSM_INSTANTIATE_SSM(T)                                                                   \
  template struct SsmParams<T>;                                                                    \
  template DiscreteGates<T> discretize(const SsmParams<T>&, const std::optional<Tensor<T>>&);      \
  template DiscreteGates<T> discretize(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> flatten_tokens(const Tensor<T>&);                                             \
  template Tensor<T> unflatten_tokens(const Tensor<T>&, std::size_t, std::size_t, std::size_t);    \
  template ScanResult<T> scan(const DiscreteGates<T>&, const Tensor<T>&, const Tensor<T>&,         \
                              const std::optional<ScanState<T>>&);                                 \
  template void detail::scan_forward(std::size_t, std::size_t, std::size_t, const T*, const T*,    \
                                     const T*, const T*, T*, T*, T*, std::size_t);                 \
  template void detail::scan_backward(std::size_t, std::size_t, std::size_t, const T*, const T*,   \
                                      const T*, const T*, const T*, const T*, std::size_t, T*, T*, \
                                      T*, T*);

RSSSM_INSTANTIATE_SSM(float)
RSSSM_INSTANTIATE_SSM(double)
RSSSM_INSTANTIATE_SSM(long double)

}  // namespace rsssm
