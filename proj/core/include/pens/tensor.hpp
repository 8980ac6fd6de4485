#pragma once

// Dense row-major tensors with tape-free reverse-mode differentiation.
//
// Every operation returns a new Tensor whose node remembers its inputs and a
// closure that pushes the output gradient back into them. backward() sorts
// the reachable graph topologically and runs each closure exactly once.
// Leaf tensors created with requires_grad=true are parameters; their grad
// buffers accumulate across backward() calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pens/real.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty unless requires_grad
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values,
                     bool requires_grad = false);
  static Tensor scalar(Real value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  /// Empty span when the tensor is not tracked.
  std::span<Real> grad();
  std::span<const Real> grad() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  void zero_grad();

  /// Value of a single-element tensor.
  Real item() const;

  /// Same values, no history, not tracked.
  Tensor detach() const;

  /// Reverse-mode pass from this scalar. Throws ShapeError when the tensor
  /// has more than one element.
  void backward() const;

  const char* op() const;

  // Used by operation implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// -- Operations ------------------------------------------------------------
// Shape mismatches throw ShapeError naming the op and the offending shapes.

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum. b's shape must equal a's shape or a trailing suffix of it;
/// b is then broadcast over a's leading axes and its gradient is reduced over
/// them.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equally shaped tensors.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);

/// Reductions remove `axis` from the shape.
Tensor max_over_axis(const Tensor& x, std::size_t axis);
Tensor mean_over_axis(const Tensor& x, std::size_t axis);
/// Sum of all elements, scalar result.
Tensor sum(const Tensor& x);

/// Gathers rows of `matrix` ([rows, dim]). `indices` has shape
/// `index_shape`; the result has shape index_shape + [dim]. The backward pass
/// scatter-adds into the gathered rows. When `frozen_row` is set, that row
/// never receives gradient.
Tensor embedding_gather(const Tensor& matrix,
                        std::span<const std::int32_t> indices,
                        const Shape& index_shape,
                        std::optional<std::size_t> frozen_row = std::nullopt);

/// Valid 1-D correlation along the sequence axis.
/// input [batch, length, channels], kernels [width, channels, filters],
/// bias [filters] -> [batch, length - width + 1, filters].
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

/// Softmax along `axis`, stabilised by subtracting the per-slice maximum.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Mean over rows of -sum(target * log(max(p, 1e-12))). probabilities and
/// targets are [batch, classes].
Tensor cross_entropy(const Tensor& probabilities, const Tensor& targets);

/// Row-wise choice: row r of the result is a[r] when keep[r] != 0, else b[r].
/// a and b are [rows, cols].
Tensor select_rows(std::span<const std::uint8_t> keep, const Tensor& a,
                   const Tensor& b);

}  // namespace PENS_REAL_ABI
}  // namespace pens
