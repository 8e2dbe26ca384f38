#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rsssm {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stability guard shared by every divide-by-norm site unless a module
/// overrides it.
inline constexpr double kEps = 1e-8;

/// When enabled, every op result is checked for NaN/Inf and divisions check
/// their denominators. Off by default.
void set_debug_checks(bool enabled);
bool debug_checks();

/// Graph recording is on by default and can be suspended per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  std::vector<T>& grad_buffer();
};

/// Dense row-major tensor with optional reverse-mode tracking. Copies share
/// the underlying node, so a Tensor behaves like a handle.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  /// Extent of axis `axis`; negative values count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<const T> data() const;
  /// In-place access for parameter updates and test fixtures. Does not
  /// participate in the recorded graph.
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Accumulated gradient; zeros when nothing has been accumulated yet.
  std::vector<T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// Reverse sweep from this scalar root. Leaf gradients accumulate across
  /// calls; intermediate gradients are reset each call.
  void backward() const;

  /// Same data, no history.
  Tensor detach() const;
  /// Deep copy of the data, no history.
  Tensor clone() const;

  std::string_view op_name() const;
  bool is_leaf() const;
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Nodes reachable from `root` that track gradients, in the order the
/// backward sweep visits them (reverse topological).
template <typename T>
std::vector<const Node<T>*> backward_order(const Tensor<T>& root);

/// Builds an op result. Records `backward` only when grad mode is on and at
/// least one input requires grad.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward);

/// Adds `delta` into the gradient of `node` if it tracks gradients.
template <typename T>
void accumulate(Node<T>& node, std::span<const T> delta);

void check_finite(std::span<const float> values, std::string_view op);
void check_finite(std::span<const double> values, std::string_view op);
void check_finite(std::span<const long double> values, std::string_view op);

}  // namespace rsssm
