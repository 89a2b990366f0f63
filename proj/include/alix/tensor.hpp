#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace alix {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

using BackwardFn = std::function<void(std::span<const double> grad_out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return inputs.empty(); }
  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major double-precision array with an optional autodiff node.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Use
/// `clone()` for a deep copy and `detach()` for a copy cut from the graph.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Mutable access to the underlying values. Intended for leaves
  /// (parameters, inputs); mutating an interior node invalidates its graph.
  std::span<double> values_mut();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, detail::BackwardFn);

  std::shared_ptr<detail::Node> node_;
};

/// True while graph recording is enabled on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (target computations,
/// finite-difference probes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output of a differentiable op. `backward` is recorded only
/// when recording is enabled and some input requires a gradient; it receives
/// the output gradient and must push contributions with `accumulate_grad`.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   detail::BackwardFn backward);

/// Adds `g` into the gradient of `t` when `t` requires one.
void accumulate_grad(const Tensor& t, std::span<const double> g);

/// Topologically ordered view of the graph reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  /// Nodes in topological order: every node appears after all of its inputs.
  const std::vector<detail::Node*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<detail::Node*> order_;
};

/// Reverse-mode sweep from a scalar loss. Populates `grad` on every node that
/// requires one (interior nodes included, so callers can read feature-map
/// gradients afterwards) and then releases the recorded graph.
void backward(const Tensor& loss);

}  // namespace alix
