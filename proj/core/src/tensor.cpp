#include "pens/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "pens/error.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) shape_fail(op, "undefined tensor");
}

NodePtr make_node(Shape shape, const char* op, std::vector<NodePtr> inputs) {
  auto node = std::make_shared<Node>();
  node->value.assign(numel(shape), Real(0));
  node->shape = std::move(shape);
  node->op = op;
  for (const auto& in : inputs) node->requires_grad |= in->requires_grad;
  if (node->requires_grad) node->grad.assign(node->value.size(), Real(0));
  node->inputs = std::move(inputs);
  return node;
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Real stable_sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// -- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), Real(0));
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (values.size() != numel(shape)) {
    shape_fail("from", std::to_string(values.size()) +
                           " values for shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), Real(0));
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value) { return from({}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    shape_fail("dim", "axis " + std::to_string(axis) + " out of range for " +
                          shape_string(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }
std::span<Real> Tensor::data() { return node_->value; }
std::span<const Real> Tensor::data() const { return node_->value; }
std::span<Real> Tensor::grad() { return node_->grad; }
std::span<const Real> Tensor::grad() const { return node_->grad; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
const char* Tensor::op() const { return node_->op; }

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (flag) {
    node_->grad.assign(node_->value.size(), Real(0));
  } else {
    node_->grad.clear();
  }
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

Real Tensor::item() const {
  if (size() != 1) shape_fail("item", "tensor has shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

void Tensor::backward() const {
  if (!defined() || size() != 1) {
    shape_fail("backward", "loss must be a scalar, got " +
                               (defined() ? shape_string(shape()) : "undefined"));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of tracked nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward) node->backward(*node);
  }
}

// -- Linear algebra ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_fail("matmul", "incompatible shapes " + shape_string(a.shape()) +
                             " and " + shape_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  auto out = make_node({a.dim(0), b.dim(1)}, "matmul", {a.node(), b.node()});
  MapR(out->value.data(), m, n).noalias() =
      CMapR(a.data().data(), m, k) * CMapR(b.data().data(), k, n);
  if (out->requires_grad) {
    out->backward = [m, k, n](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      CMapR g(self.grad.data(), m, n);
      if (na.requires_grad) {
        MapR(na.grad.data(), m, k).noalias() +=
            g * CMapR(nb.value.data(), k, n).transpose();
      }
      if (nb.requires_grad) {
        MapR(nb.grad.data(), k, n).noalias() +=
            CMapR(na.value.data(), m, k).transpose() * g;
      }
    };
  }
  return Tensor(out);
}

// -- Elementwise -----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool suffix =
      sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  if (!suffix) {
    shape_fail("add", "cannot broadcast " + shape_string(sb) + " onto " +
                          shape_string(sa));
  }
  auto out = make_node(sa, "add", {a.node(), b.node()});
  const std::size_t inner = b.size();
  const std::size_t reps = inner == 0 ? 0 : a.size() / inner;
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out->value.data();
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < inner; ++i) {
      po[r * inner + i] = pa[r * inner + i] + pb[i];
    }
  }
  if (out->requires_grad) {
    out->backward = [inner, reps](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      if (na.requires_grad) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
      }
      if (nb.requires_grad) {
        for (std::size_t r = 0; r < reps; ++r) {
          for (std::size_t i = 0; i < inner; ++i) {
            nb.grad[i] += self.grad[r * inner + i];
          }
        }
      }
    };
  }
  return Tensor(out);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    shape_fail(op, "shapes differ: " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

}  // namespace

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = make_node(a.shape(), "sub", {a.node(), b.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) {
    out->value[i] = a.data()[i] - b.data()[i];
  }
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (na.requires_grad) na.grad[i] += self.grad[i];
        if (nb.requires_grad) nb.grad[i] -= self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = make_node(a.shape(), "mul", {a.node(), b.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) {
    out->value[i] = a.data()[i] * b.data()[i];
  }
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (na.requires_grad) na.grad[i] += self.grad[i] * nb.value[i];
        if (nb.requires_grad) nb.grad[i] += self.grad[i] * na.value[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, Real factor) {
  require_defined(a, "scale");
  auto out = make_node(a.shape(), "scale", {a.node()});
  for (std::size_t i = 0; i < out->value.size(); ++i) {
    out->value[i] = a.data()[i] * factor;
  }
  if (out->requires_grad) {
    out->backward = [factor](Node& self) {
      Node& na = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        na.grad[i] += self.grad[i] * factor;
      }
    };
  }
  return Tensor(out);
}

namespace {

// Unary op whose derivative is expressible from the output value.
template <typename Fwd, typename DerivFromOut>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, DerivFromOut deriv) {
  require_defined(x, op);
  auto out = make_node(x.shape(), op, {x.node()});
  const auto in = x.data();
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = fwd(in[i]);
  if (out->requires_grad) {
    out->backward = [deriv](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        nx.grad[i] += self.grad[i] * deriv(self.value[i]);
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid,
               [](Real y) { return y * (Real(1) - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](Real v) { return std::tanh(v); },
               [](Real y) { return Real(1) - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(x, "relu", [](Real v) { return v > 0 ? v : Real(0); },
               [](Real y) { return y > 0 ? Real(1) : Real(0); });
}

// -- Structural ------------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    shape_fail("concat", "axis " + std::to_string(axis) + " out of range for " +
                             shape_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) {
      shape_fail("concat", "rank mismatch " + shape_string(first) + " vs " +
                               shape_string(probe));
    }
    probe[axis] = first[axis];
    if (probe != first) {
      shape_fail("concat", "shapes " + shape_string(first) + " and " +
                               shape_string(p.shape()) + " differ off-axis");
    }
    out_shape[axis] += p.dim(axis);
    inputs.push_back(p.node());
  }
  auto out = make_node(out_shape, "concat", std::move(inputs));
  const AxisSplit os = split_axis(out_shape, axis);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t width = p.dim(axis) * os.inner;
    const Real* src = p.data().data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(src + o * width, width,
                  out->value.data() + o * os.extent * os.inner + offset * os.inner);
    }
    offset += p.dim(axis);
  }
  if (out->requires_grad) {
    out->backward = [os, offsets](Node& self) {
      for (std::size_t k = 0; k < self.inputs.size(); ++k) {
        Node& in = *self.inputs[k];
        if (!in.requires_grad) continue;
        const std::size_t width = in.value.size() / os.outer;
        for (std::size_t o = 0; o < os.outer; ++o) {
          const Real* g = self.grad.data() + o * os.extent * os.inner +
                          offsets[k] * os.inner;
          for (std::size_t i = 0; i < width; ++i) in.grad[o * width + i] += g[i];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length) {
  require_defined(x, "slice");
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    shape_fail("slice", "range [" + std::to_string(start) + ", " +
                            std::to_string(start + length) + ") on axis " +
                            std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  auto out = make_node(out_shape, "slice", {x.node()});
  const AxisSplit is = split_axis(x.shape(), axis);
  const std::size_t width = length * is.inner;
  for (std::size_t o = 0; o < is.outer; ++o) {
    std::copy_n(x.data().data() + o * is.extent * is.inner + start * is.inner,
                width, out->value.data() + o * width);
  }
  if (out->requires_grad) {
    out->backward = [is, start, width](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t o = 0; o < is.outer; ++o) {
        Real* dst = nx.grad.data() + o * is.extent * is.inner + start * is.inner;
        const Real* g = self.grad.data() + o * width;
        for (std::size_t i = 0; i < width; ++i) dst[i] += g[i];
      }
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (numel(shape) != x.size()) {
    shape_fail("reshape", "cannot view " + shape_string(x.shape()) + " as " +
                              shape_string(shape));
  }
  auto out = make_node(std::move(shape), "reshape", {x.node()});
  std::copy(x.data().begin(), x.data().end(), out->value.begin());
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

// -- Reductions ------------------------------------------------------------------

namespace {

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  require_defined(x, op);
  if (axis >= x.rank() || x.dim(axis) == 0) {
    shape_fail(op, "axis " + std::to_string(axis) + " invalid for " +
                       shape_string(x.shape()));
  }
}

}  // namespace

Tensor max_over_axis(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "max_over_axis");
  const AxisSplit s = split_axis(x.shape(), axis);
  auto out = make_node(drop_axis(x.shape(), axis), "max_over_axis", {x.node()});
  std::vector<std::size_t> argmax(out->value.size());
  const Real* in = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.extent * s.inner + i;
      for (std::size_t e = 1; e < s.extent; ++e) {
        const std::size_t idx = (o * s.extent + e) * s.inner + i;
        if (in[idx] > in[best]) best = idx;
      }
      argmax[o * s.inner + i] = best;
      out->value[o * s.inner + i] = in[best];
    }
  }
  if (out->requires_grad) {
    out->backward = [argmax = std::move(argmax)](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        nx.grad[argmax[i]] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "mean_over_axis");
  const AxisSplit s = split_axis(x.shape(), axis);
  auto out = make_node(drop_axis(x.shape(), axis), "mean_over_axis", {x.node()});
  const Real* in = x.data().data();
  const Real inv = Real(1) / static_cast<Real>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      Real acc = 0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += in[(o * s.extent + e) * s.inner + i];
      out->value[o * s.inner + i] = acc * inv;
    }
  }
  if (out->requires_grad) {
    out->backward = [s, inv](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const Real g = self.grad[o * s.inner + i] * inv;
          for (std::size_t e = 0; e < s.extent; ++e) {
            nx.grad[(o * s.extent + e) * s.inner + i] += g;
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  auto out = make_node({}, "sum", {x.node()});
  Real acc = 0;
  for (Real v : x.data()) acc += v;
  out->value[0] = acc;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& nx = *self.inputs[0];
      for (Real& g : nx.grad) g += self.grad[0];
    };
  }
  return Tensor(out);
}

// -- Embedding / convolution -------------------------------------------------------

Tensor embedding_gather(const Tensor& matrix, std::span<const std::int32_t> indices,
                        const Shape& index_shape,
                        std::optional<std::size_t> frozen_row) {
  require_defined(matrix, "embedding_gather");
  if (matrix.rank() != 2) {
    shape_fail("embedding_gather", "matrix must be rank 2, got " +
                                       shape_string(matrix.shape()));
  }
  if (numel(index_shape) != indices.size()) {
    shape_fail("embedding_gather", std::to_string(indices.size()) +
                                       " indices for index shape " +
                                       shape_string(index_shape));
  }
  const std::size_t rows = matrix.dim(0);
  const std::size_t dim = matrix.dim(1);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= rows) {
      shape_fail("embedding_gather", "index " + std::to_string(indices[i]) +
                                         " out of range for " + std::to_string(rows) +
                                         " rows");
    }
  }
  Shape out_shape = index_shape;
  out_shape.push_back(dim);
  auto out = make_node(out_shape, "embedding_gather", {matrix.node()});
  const Real* m = matrix.data().data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(m + static_cast<std::size_t>(indices[i]) * dim, dim,
                out->value.data() + i * dim);
  }
  if (out->requires_grad) {
    std::vector<std::int32_t> idx(indices.begin(), indices.end());
    out->backward = [idx = std::move(idx), dim, frozen_row](Node& self) {
      Node& nm = *self.inputs[0];
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = static_cast<std::size_t>(idx[i]);
        if (frozen_row && row == *frozen_row) continue;
        Real* dst = nm.grad.data() + row * dim;
        const Real* g = self.grad.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) dst[d] += g[d];
      }
    };
  }
  return Tensor(out);
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require_defined(input, "conv1d");
  require_defined(kernels, "conv1d");
  require_defined(bias, "conv1d");
  if (input.rank() != 3 || kernels.rank() != 3 || bias.rank() != 1 ||
      kernels.dim(1) != input.dim(2) || bias.dim(0) != kernels.dim(2) ||
      kernels.dim(0) == 0 || kernels.dim(0) > input.dim(1)) {
    shape_fail("conv1d", "input " + shape_string(input.shape()) + ", kernels " +
                             shape_string(kernels.shape()) + ", bias " +
                             shape_string(bias.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t length = input.dim(1);
  const std::size_t channels = input.dim(2);
  const std::size_t width = kernels.dim(0);
  const std::size_t filters = kernels.dim(2);
  const std::size_t steps = length - width + 1;
  const auto window = static_cast<Eigen::Index>(width * channels);
  using Strided = Eigen::Map<const MatR, 0, Eigen::OuterStride<>>;

  auto out = make_node({batch, steps, filters}, "conv1d",
                       {input.node(), kernels.node(), bias.node()});
  CMapR k(kernels.data().data(), window, static_cast<Eigen::Index>(filters));
  Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> b(
      bias.data().data(), static_cast<Eigen::Index>(filters));
  for (std::size_t n = 0; n < batch; ++n) {
    // Row t of the window view is the contiguous slab x[t : t + width, :].
    Strided x(input.data().data() + n * length * channels,
              static_cast<Eigen::Index>(steps), window,
              Eigen::OuterStride<>(static_cast<Eigen::Index>(channels)));
    MapR y(out->value.data() + n * steps * filters,
           static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(filters));
    y.noalias() = x * k;
    y.rowwise() += b;
  }
  if (out->requires_grad) {
    out->backward = [=](Node& self) {
      Node& ni = *self.inputs[0];
      Node& nk = *self.inputs[1];
      Node& nb = *self.inputs[2];
      CMapR kk(nk.value.data(), window, static_cast<Eigen::Index>(filters));
      MatR scratch;
      for (std::size_t n = 0; n < batch; ++n) {
        CMapR g(self.grad.data() + n * steps * filters,
                static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(filters));
        if (nk.requires_grad) {
          Strided x(ni.value.data() + n * length * channels,
                    static_cast<Eigen::Index>(steps), window,
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(channels)));
          MapR(nk.grad.data(), window, static_cast<Eigen::Index>(filters)).noalias() +=
              x.transpose() * g;
        }
        if (nb.requires_grad) {
          Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>>(
              nb.grad.data(), static_cast<Eigen::Index>(filters)) += g.colwise().sum();
        }
        if (ni.requires_grad) {
          scratch.noalias() = g * kk.transpose();
          Real* dst = ni.grad.data() + n * length * channels;
          for (std::size_t t = 0; t < steps; ++t) {
            const Real* row = scratch.data() + t * static_cast<std::size_t>(window);
            Real* d = dst + t * channels;
            for (Eigen::Index j = 0; j < window; ++j) d[j] += row[j];
          }
        }
      }
    };
  }
  return Tensor(out);
}

// -- Probability ---------------------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  auto out = make_node(x.shape(), "softmax", {x.node()});
  const Real* in = x.data().data();
  Real* po = out->value.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      Real hi = in[base];
      for (std::size_t e = 1; e < s.extent; ++e) hi = std::max(hi, in[base + e * s.inner]);
      Real total = 0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const Real v = std::exp(in[base + e * s.inner] - hi);
        po[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) po[base + e * s.inner] /= total;
    }
  }
  if (out->requires_grad) {
    out->backward = [s](Node& self) {
      Node& nx = *self.inputs[0];
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          Real dot = 0;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            dot += self.grad[k] * self.value[k];
          }
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            nx.grad[k] += self.value[k] * (self.grad[k] - dot);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor cross_entropy(const Tensor& probabilities, const Tensor& targets) {
  require_same_shape(probabilities, targets, "cross_entropy");
  if (probabilities.rank() != 2 || probabilities.dim(0) == 0) {
    shape_fail("cross_entropy", "expected [batch, classes], got " +
                                    shape_string(probabilities.shape()));
  }
  constexpr Real kFloor = Real(1e-12);
  const std::size_t rows = probabilities.dim(0);
  auto out = make_node({}, "cross_entropy", {probabilities.node(), targets.node()});
  const auto p = probabilities.data();
  const auto y = targets.data();
  Real total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] != 0) total -= y[i] * std::log(std::max(p[i], kFloor));
  }
  out->value[0] = total / static_cast<Real>(rows);
  if (out->requires_grad) {
    out->backward = [rows, kFloor](Node& self) {
      Node& np = *self.inputs[0];
      Node& ny = *self.inputs[1];
      const Real g = self.grad[0] / static_cast<Real>(rows);
      for (std::size_t i = 0; i < np.value.size(); ++i) {
        const Real pi = np.value[i];
        if (np.requires_grad && ny.value[i] != 0 && pi > kFloor) {
          np.grad[i] -= g * ny.value[i] / pi;
        }
        if (ny.requires_grad) ny.grad[i] -= g * std::log(std::max(pi, kFloor));
      }
    };
  }
  return Tensor(out);
}

Tensor select_rows(std::span<const std::uint8_t> keep, const Tensor& a,
                   const Tensor& b) {
  require_same_shape(a, b, "select_rows");
  if (a.rank() != 2 || keep.size() != a.dim(0)) {
    shape_fail("select_rows", std::to_string(keep.size()) + " flags for " +
                                  shape_string(a.shape()));
  }
  const std::size_t cols = a.dim(1);
  auto out = make_node(a.shape(), "select_rows", {a.node(), b.node()});
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Real* src = (keep[r] ? a.data() : b.data()).data() + r * cols;
    std::copy_n(src, cols, out->value.data() + r * cols);
  }
  if (out->requires_grad) {
    std::vector<std::uint8_t> flags(keep.begin(), keep.end());
    out->backward = [flags = std::move(flags), cols](Node& self) {
      for (std::size_t r = 0; r < flags.size(); ++r) {
        Node& target = *self.inputs[flags[r] ? 0 : 1];
        if (!target.requires_grad) continue;
        for (std::size_t c = 0; c < cols; ++c) {
          target.grad[r * cols + c] += self.grad[r * cols + c];
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace PENS_REAL_ABI
}  // namespace pens
