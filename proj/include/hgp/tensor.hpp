#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hgp {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage shared between a Tensor handle and the gradient tape.
struct TensorNode {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

/// Dense row-major array with an optional gradient buffer.
///
/// Copies are shallow: two handles copied from one another alias the same
/// storage. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor scalar(Real v) { return Tensor({1}, {v}); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }
  /// Leading extent for a matrix; 1 for a vector.
  std::size_t rows() const;
  /// Trailing extent.
  std::size_t cols() const;

  std::span<const Real> data() const { return node_->data; }
  std::span<Real> mutable_data() { return node_->data; }
  const Real* ptr() const { return node_->data.data(); }
  Real* mutable_ptr() { return node_->data.data(); }
  Real item() const;
  Real at(std::size_t i) const { return node_->data.at(i); }
  Real at(std::size_t r, std::size_t c) const { return node_->data.at(r * cols() + c); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient view; zeros if nothing has been accumulated yet.
  std::vector<Real> grad_or_zeros() const;
  std::span<const Real> grad() const { return node_->grad; }
  /// Gradient buffer, allocated (zeroed) on first use.
  std::span<Real> grad_buffer() const;
  void zero_grad();

  /// Deep copy of the values; the copy is a fresh leaf without gradient.
  Tensor clone() const;
  Tensor reshaped(Shape shape) const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Records differentiable operations in execution order.
///
/// Only operations executed while a tape is active (see TapeScope) and that
/// have at least one input requiring a gradient are recorded.
class GradTape {
 public:
  struct Node {
    const char* op;
    std::shared_ptr<TensorNode> output;
    std::function<void(std::span<const Real> out_grad)> backward;
  };

  void push(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and walks the tape in reverse insertion order.
  void backward(const Tensor& loss);

 private:
  std::vector<Node> nodes_;
};

/// Installs a tape as the active one for the current thread.
class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

GradTape* active_tape() noexcept;

/// Throws NumericError if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace hgp
