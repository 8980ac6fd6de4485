#include "pens/layers.hpp"

#include <cmath>

#include "pens/error.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<Real> values(numel(shape));
  for (auto& v : values) v = static_cast<Real>(uniform(rng, -limit, limit));
  return Tensor::from(std::move(shape), std::move(values), true);
}

namespace {

Tensor zero_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor apply(Activation activation, const Tensor& x) {
  switch (activation) {
    case Activation::linear: return x;
    case Activation::relu: return relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
    case Activation::softmax: return softmax(x, x.rank() - 1);
  }
  return x;
}

void check_rate(double rate, const char* op) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(std::string(op) + ": rate must be in [0, 1), got " +
                std::to_string(rate));
  }
}

Rng& mask_rng(const ForwardContext& ctx, const char* op) {
  if (ctx.rng == nullptr) {
    throw Error(std::string(op) + ": training mode requires a mask generator");
  }
  return *ctx.rng;
}

}  // namespace

// -- Embedding -------------------------------------------------------------------

Embedding::Embedding(Tensor matrix, bool trainable) : matrix_(std::move(matrix)) {
  if (matrix_.rank() != 2 || matrix_.dim(0) < 1) {
    throw ShapeError("Embedding: matrix must be [rows, dim], got " +
                     shape_string(matrix_.shape()));
  }
  matrix_.set_requires_grad(trainable);
}

Tensor Embedding::forward(std::span<const std::int32_t> indices,
                          std::size_t batch, std::size_t length) const {
  return embedding_gather(matrix_, indices, {batch, length}, std::size_t{0});
}

// -- Conv1D ------------------------------------------------------------------------

Conv1D::Conv1D(std::size_t channels, std::size_t filters, std::size_t width,
               Rng& rng)
    : kernels_(glorot_uniform({width, channels, filters}, width * channels,
                              width * filters, rng)),
      bias_(zero_param({filters})) {}

Conv1D::Conv1D(Tensor kernels, Tensor bias)
    : kernels_(std::move(kernels)), bias_(std::move(bias)) {}

Tensor Conv1D::forward(const Tensor& x) const {
  return relu(conv1d(x, kernels_, bias_));
}

NamedTensors Conv1D::parameters(const std::string& prefix) const {
  return {{prefix + ".kernels", kernels_}, {prefix + ".bias", bias_}};
}

// -- Dense -------------------------------------------------------------------------

Dense::Dense(std::size_t inputs, std::size_t units, Activation activation,
             Rng& rng)
    : weight_(glorot_uniform({inputs, units}, inputs, units, rng)),
      bias_(zero_param({units})),
      activation_(activation) {}

Dense::Dense(Tensor weight, Tensor bias, Activation activation)
    : weight_(std::move(weight)), bias_(std::move(bias)), activation_(activation) {}

Tensor Dense::forward(const Tensor& x) const {
  return apply(activation_, add(matmul(x, weight_), bias_));
}

NamedTensors Dense::parameters(const std::string& prefix) const {
  return {{prefix + ".weight", weight_}, {prefix + ".bias", bias_}};
}

// -- Dropout / pooling -------------------------------------------------------------

Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  check_rate(rate, "dropout");
  if (!ctx.training || rate == 0.0) return x;
  Rng& rng = mask_rng(ctx, "dropout");
  const auto keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  std::vector<Real> mask(x.size());
  for (auto& m : mask) m = uniform01(rng) < rate ? Real(0) : keep_scale;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor spatial_dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  check_rate(rate, "spatial_dropout");
  if (x.rank() != 3) {
    throw ShapeError("spatial_dropout: expected [batch, length, dim], got " +
                     shape_string(x.shape()));
  }
  if (!ctx.training || rate == 0.0) return x;
  Rng& rng = mask_rng(ctx, "spatial_dropout");
  const auto keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  const std::size_t words = x.dim(0) * x.dim(1);
  const std::size_t dim = x.dim(2);
  std::vector<Real> mask(x.size());
  for (std::size_t w = 0; w < words; ++w) {
    const Real m = uniform01(rng) < rate ? Real(0) : keep_scale;
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(w * dim), dim, m);
  }
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor max_pool_over_time(const Tensor& x) {
  if (x.rank() != 3) {
    throw ShapeError("max_pool_over_time: expected [batch, steps, filters], got " +
                     shape_string(x.shape()));
  }
  return max_over_axis(x, 1);
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("flatten: scalar input");
  return reshape(x, {x.dim(0), x.size() / std::max<std::size_t>(x.dim(0), 1)});
}

// -- LSTM ------------------------------------------------------------------------------

LSTMCell::LSTMCell(std::size_t inputs, std::size_t hidden, Rng& rng)
    : kernel_(glorot_uniform({inputs, 4 * hidden}, inputs, 4 * hidden, rng)),
      recurrent_(glorot_uniform({hidden, 4 * hidden}, hidden, 4 * hidden, rng)),
      bias_(zero_param({4 * hidden})) {
  auto b = bias_.data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), Real(1));
}

LSTMCell::LSTMCell(Tensor kernel, Tensor recurrent, Tensor bias)
    : kernel_(std::move(kernel)), recurrent_(std::move(recurrent)), bias_(std::move(bias)) {
  const std::size_t h = recurrent_.dim(0);
  if (kernel_.rank() != 2 || kernel_.dim(1) != 4 * h || recurrent_.dim(1) != 4 * h ||
      bias_.rank() != 1 || bias_.dim(0) != 4 * h) {
    throw ShapeError("LSTMCell: kernel " + shape_string(kernel_.shape()) +
                     ", recurrent " + shape_string(recurrent_.shape()) + ", bias " +
                     shape_string(bias_.shape()));
  }
}

Tensor LSTMCell::project_inputs(const Tensor& x) const {
  return add(matmul(x, kernel_), bias_);
}

RecurrentState LSTMCell::step(const Tensor& projected,
                              const RecurrentState& state) const {
  const std::size_t h = hidden_size();
  const Tensor gates = add(projected, matmul(state.h, recurrent_));
  const Tensor i = sigmoid(slice(gates, 1, 0, h));
  const Tensor f = sigmoid(slice(gates, 1, h, h));
  const Tensor g = tanh(slice(gates, 1, 2 * h, h));
  const Tensor o = sigmoid(slice(gates, 1, 3 * h, h));
  Tensor c = add(mul(f, state.c), mul(i, g));
  Tensor out = mul(o, tanh(c));
  return {std::move(out), std::move(c)};
}

RecurrentState LSTMCell::initial_state(std::size_t batch) const {
  return {Tensor::zeros({batch, hidden_size()}), Tensor::zeros({batch, hidden_size()})};
}

NamedTensors LSTMCell::parameters(const std::string& prefix) const {
  return {{prefix + ".kernel", kernel_},
          {prefix + ".recurrent", recurrent_},
          {prefix + ".bias", bias_}};
}

// -- GRU -------------------------------------------------------------------------------

GRUCell::GRUCell(std::size_t inputs, std::size_t hidden, Rng& rng)
    : kernel_(glorot_uniform({inputs, 3 * hidden}, inputs, 3 * hidden, rng)),
      recurrent_gates_(glorot_uniform({hidden, 2 * hidden}, hidden, 2 * hidden, rng)),
      recurrent_candidate_(glorot_uniform({hidden, hidden}, hidden, hidden, rng)),
      bias_(zero_param({3 * hidden})) {}

GRUCell::GRUCell(Tensor kernel, Tensor recurrent_gates, Tensor recurrent_candidate,
                 Tensor bias)
    : kernel_(std::move(kernel)),
      recurrent_gates_(std::move(recurrent_gates)),
      recurrent_candidate_(std::move(recurrent_candidate)),
      bias_(std::move(bias)) {
  const std::size_t h = recurrent_candidate_.dim(0);
  if (kernel_.rank() != 2 || kernel_.dim(1) != 3 * h ||
      recurrent_gates_.shape() != Shape{h, 2 * h} ||
      recurrent_candidate_.shape() != Shape{h, h} || bias_.shape() != Shape{3 * h}) {
    throw ShapeError("GRUCell: inconsistent parameter shapes");
  }
}

Tensor GRUCell::project_inputs(const Tensor& x) const {
  return add(matmul(x, kernel_), bias_);
}

RecurrentState GRUCell::step(const Tensor& projected,
                             const RecurrentState& state) const {
  const std::size_t h = hidden_size();
  const Tensor zr = sigmoid(
      add(slice(projected, 1, 0, 2 * h), matmul(state.h, recurrent_gates_)));
  const Tensor z = slice(zr, 1, 0, h);
  const Tensor r = slice(zr, 1, h, h);
  const Tensor candidate = tanh(add(slice(projected, 1, 2 * h, h),
                                    matmul(mul(r, state.h), recurrent_candidate_)));
  // (1 - z) * h + z * h~  ==  h + z * (h~ - h)
  return {add(state.h, mul(z, sub(candidate, state.h))), Tensor()};
}

RecurrentState GRUCell::initial_state(std::size_t batch) const {
  return {Tensor::zeros({batch, hidden_size()}), Tensor()};
}

NamedTensors GRUCell::parameters(const std::string& prefix) const {
  return {{prefix + ".kernel", kernel_},
          {prefix + ".recurrent_gates", recurrent_gates_},
          {prefix + ".recurrent_candidate", recurrent_candidate_},
          {prefix + ".bias", bias_}};
}

// -- Sequence drivers --------------------------------------------------------------------

Tensor run_recurrent(const RecurrentCell& cell, const Tensor& x,
                     std::span<const std::size_t> lengths, bool reverse) {
  if (x.rank() != 3 || x.dim(2) != cell.input_size() || lengths.size() != x.dim(0)) {
    throw ShapeError("run_recurrent: input " + shape_string(x.shape()) + " with " +
                     std::to_string(lengths.size()) + " lengths for a cell of input " +
                     std::to_string(cell.input_size()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t length = x.dim(1);
  const Tensor projected = cell.project_inputs(reshape(x, {batch * length, x.dim(2)}));
  const std::size_t width = projected.dim(1);
  const Tensor steps = reshape(projected, {batch, length, width});

  RecurrentState state = cell.initial_state(batch);
  std::vector<std::uint8_t> active(batch);
  for (std::size_t k = 0; k < length; ++k) {
    const std::size_t t = reverse ? length - 1 - k : k;
    bool any = false;
    bool all = true;
    for (std::size_t b = 0; b < batch; ++b) {
      active[b] = t < lengths[b] ? 1 : 0;
      any |= active[b] != 0;
      all &= active[b] != 0;
    }
    if (!any) continue;
    const Tensor input = reshape(slice(steps, 1, t, 1), {batch, width});
    RecurrentState next = cell.step(input, state);
    if (!all) {
      next.h = select_rows(active, next.h, state.h);
      if (next.c.defined()) next.c = select_rows(active, next.c, state.c);
    }
    state = std::move(next);
  }
  return state.h;
}

Bidirectional::Bidirectional(std::shared_ptr<const RecurrentCell> forward,
                             std::shared_ptr<const RecurrentCell> backward)
    : forward_(std::move(forward)), backward_(std::move(backward)) {
  if (!forward_ || !backward_ || forward_->input_size() != backward_->input_size()) {
    throw ShapeError("Bidirectional: direction cells must share the input size");
  }
}

Tensor Bidirectional::forward(const Tensor& x,
                              std::span<const std::size_t> lengths) const {
  return concat({run_recurrent(*forward_, x, lengths, false),
                 run_recurrent(*backward_, x, lengths, true)},
                1);
}

std::size_t Bidirectional::output_size() const {
  return forward_->hidden_size() + backward_->hidden_size();
}

NamedTensors Bidirectional::parameters(const std::string& prefix) const {
  NamedTensors out = forward_->parameters(prefix + ".forward");
  if (backward_ != forward_) {
    for (auto& p : backward_->parameters(prefix + ".backward")) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace PENS_REAL_ABI
}  // namespace pens
