#include "rsssm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>

namespace rsssm {

namespace {

std::atomic<bool> g_debug_checks{false};
thread_local bool t_grad_enabled = true;

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void set_debug_checks(bool enabled) { g_debug_checks.store(enabled); }
bool debug_checks() { return g_debug_checks.load(std::memory_order_relaxed); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename V>
static void check_finite_impl(std::span<const V> values, std::string_view op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite value " << values[i] << " at flat index " << i << " in output of '" << op
         << "'";
      throw NumericError(os.str());
    }
  }
}

void check_finite(std::span<const float> values, std::string_view op) {
  check_finite_impl(values, op);
}
void check_finite(std::span<const double> values, std::string_view op) {
  check_finite_impl(values, op);
}
void check_finite(std::span<const long double> values, std::string_view op) {
  check_finite_impl(values, op);
}

template <typename T>
std::vector<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<Node<T>>()) {
  if (rsssm::numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(rsssm::numel(shape)) + " elements but " +
                     std::to_string(data.size()) + " were given");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(shape, std::vector<T>(rsssm::numel(shape), T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  return Tensor(shape, std::vector<T>(rsssm::numel(shape), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const auto r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape()));
  }
  return shape()[static_cast<std::size_t>(a)];
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return node_->data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  }
  return node_->data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (!node_->is_leaf()) throw std::logic_error("requires_grad can only be set on leaves");
  node_->requires_grad = value;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
std::vector<T> Tensor<T>::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return std::vector<T>(node_->data.size(), T(0));
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  return node_->grad_buffer();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
std::vector<const Node<T>*> backward_order(const Tensor<T>& root) {
  std::vector<const Node<T>*> topo;
  if (!root.requires_grad()) return topo;
  // Iterative post-order DFS; graphs from long scans can be deep.
  std::unordered_set<const Node<T>*> seen;
  std::vector<std::pair<const Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(topo.begin(), topo.end());
  return topo;
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar root, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) {
    std::cerr << "warning: backward() called on a tensor that does not track gradients\n";
    return;
  }
  const auto order = backward_order(*this);
  for (const Node<T>* n : order) {
    if (!n->is_leaf()) const_cast<Node<T>*>(n)->grad.clear();
  }
  node_->grad_buffer()[0] += T(1);
  for (const Node<T>* cn : order) {
    auto* n = const_cast<Node<T>*>(cn);
    if (n->is_leaf() || !n->backward || n->grad.empty()) continue;
    n->backward(*n);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto n = std::make_shared<Node<T>>();
  n->shape = node_->shape;
  n->data = node_->data;
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return detach();
}

template <typename T>
std::string_view Tensor<T>::op_name() const {
  return node_->op;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return node_->is_leaf();
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward) {
  if (debug_checks()) check_finite(std::span<const T>(data), op);
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (const auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
void accumulate(Node<T>& node, std::span<const T> delta) {
  if (!node.requires_grad) return;
  auto& g = node.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

template struct Node<float>;
template struct Node<double>;
template class Tensor<float>;
template class Tensor<double>;
template std::vector<const Node<float>*> backward_order(const Tensor<float>&);
template std::vector<const Node<double>*> backward_order(const Tensor<double>&);
template Tensor<float> make_result(Shape, std::vector<float>, std::string_view,
                                   std::vector<Tensor<float>>, std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::string_view,
                                    std::vector<Tensor<double>>,
                                    std::function<void(Node<double>&)>);
template void accumulate(Node<float>&, std::span<const float>);
template void accumulate(Node<double>&, std::span<const double>);
template struct Node<long double>;
template class Tensor<long double>;
template std::vector<const Node<long double>*> backward_order(const Tensor<long double>&);
template Tensor<long double> make_result(Shape, std::vector<long double>, std::string_view,
                                         std::vector<Tensor<long double>>,
                                         std::function<void(Node<long double>&)>);
template void accumulate(Node<long double>&, std::span<const long double>);

}  // namespace rsssm
