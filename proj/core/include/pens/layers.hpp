#pragma once

// Layer vocabulary for the text classifiers: embedding lookup, 1-D
// convolution, pooling, dense, (spatial) dropout, LSTM and GRU cells and a
// bidirectional wrapper. Layers are parameter holders plus pure functions of
// (input, parameters, mode, mask generator).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pens/rng.hpp"
#include "pens/tensor.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Training mode enables dropout; `rng` supplies the masks and must be set
/// whenever training is true.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

enum class Activation { linear, relu, sigmoid, tanh, softmax };

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

class Embedding {
 public:
  /// `matrix` is [rows, dim]; row 0 is the padding row and never trained.
  Embedding(Tensor matrix, bool trainable);

  /// indices are [batch, length] row-major -> [batch, length, dim].
  Tensor forward(std::span<const std::int32_t> indices, std::size_t batch,
                 std::size_t length) const;

  const Tensor& matrix() const { return matrix_; }
  bool trainable() const { return matrix_.requires_grad(); }
  std::size_t dim() const { return matrix_.dim(1); }

 private:
  Tensor matrix_;
};

class Conv1D {
 public:
  Conv1D(std::size_t channels, std::size_t filters, std::size_t width, Rng& rng);
  Conv1D(Tensor kernels, Tensor bias);

  /// [batch, length, channels] -> [batch, length - width + 1, filters], ReLU.
  Tensor forward(const Tensor& x) const;

  NamedTensors parameters(const std::string& prefix) const;
  const Tensor& kernels() const { return kernels_; }

 private:
  Tensor kernels_;
  Tensor bias_;
};

class Dense {
 public:
  Dense(std::size_t inputs, std::size_t units, Activation activation, Rng& rng);
  Dense(Tensor weight, Tensor bias, Activation activation);

  /// [batch, inputs] -> [batch, units]
  Tensor forward(const Tensor& x) const;

  NamedTensors parameters(const std::string& prefix) const;

 private:
  Tensor weight_;
  Tensor bias_;
  Activation activation_;
};

/// Inverted dropout; identity outside training or when rate == 0.
Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx);

/// Drops whole word vectors: one Bernoulli draw per (batch, position) of a
/// [batch, length, dim] tensor; survivors are scaled by 1 / (1 - rate).
Tensor spatial_dropout(const Tensor& x, double rate, const ForwardContext& ctx);

/// [batch, steps, filters] -> [batch, filters]
Tensor max_pool_over_time(const Tensor& x);

/// [batch, ...] -> [batch, product of the rest]
Tensor flatten(const Tensor& x);

// -- Recurrent ---------------------------------------------------------------

struct RecurrentState {
  Tensor h;
  Tensor c;  // LSTM only
};

class RecurrentCell {
 public:
  virtual ~RecurrentCell() = default;

  virtual std::size_t input_size() const = 0;
  virtual std::size_t hidden_size() const = 0;

  /// Input contribution x W + b for many time steps at once: [n, input] ->
  /// [n, gate width].
  virtual Tensor project_inputs(const Tensor& x) const = 0;

  /// One step from a projected input row block [batch, gate width].
  virtual RecurrentState step(const Tensor& projected,
                              const RecurrentState& state) const = 0;

  virtual RecurrentState initial_state(std::size_t batch) const = 0;
  virtual NamedTensors parameters(const std::string& prefix) const = 0;

  /// One step from a raw input x_t [batch, input].
  RecurrentState operator()(const Tensor& x, const RecurrentState& state) const {
    return step(project_inputs(x), state);
  }
};

/// Gates i, f, o = sigmoid(.), g = tanh(.); c' = f*c + i*g; h' = o*tanh(c').
/// Kernel column blocks are ordered i, f, g, o.
class LSTMCell final : public RecurrentCell {
 public:
  /// Glorot-uniform kernels, zero bias except forget-gate bias = 1.
  LSTMCell(std::size_t inputs, std::size_t hidden, Rng& rng);
  /// kernel [inputs, 4h], recurrent [h, 4h], bias [4h].
  LSTMCell(Tensor kernel, Tensor recurrent, Tensor bias);

  std::size_t input_size() const override { return kernel_.dim(0); }
  std::size_t hidden_size() const override { return recurrent_.dim(0); }
  Tensor project_inputs(const Tensor& x) const override;
  RecurrentState step(const Tensor& projected,
                      const RecurrentState& state) const override;
  RecurrentState initial_state(std::size_t batch) const override;
  NamedTensors parameters(const std::string& prefix) const override;

 private:
  Tensor kernel_;
  Tensor recurrent_;
  Tensor bias_;
};

/// z, r = sigmoid(.); h~ = tanh(W x + U (r*h) + b); h' = (1-z)*h + z*h~.
/// Kernel column blocks are ordered z, r, h.
class GRUCell final : public RecurrentCell {
 public:
  GRUCell(std::size_t inputs, std::size_t hidden, Rng& rng);
  /// kernel [inputs, 3h], recurrent_gates [h, 2h], recurrent_candidate [h, h],
  /// bias [3h].
  GRUCell(Tensor kernel, Tensor recurrent_gates, Tensor recurrent_candidate,
          Tensor bias);

  std::size_t input_size() const override { return kernel_.dim(0); }
  std::size_t hidden_size() const override { return recurrent_candidate_.dim(0); }
  Tensor project_inputs(const Tensor& x) const override;
  RecurrentState step(const Tensor& projected,
                      const RecurrentState& state) const override;
  RecurrentState initial_state(std::size_t batch) const override;
  NamedTensors parameters(const std::string& prefix) const override;

 private:
  Tensor kernel_;
  Tensor recurrent_gates_;
  Tensor recurrent_candidate_;
  Tensor bias_;
};

/// Runs `cell` over x [batch, length, input] and returns the final hidden
/// state [batch, hidden]. Step t only updates sequences with t < lengths[b];
/// padded steps carry the state through unchanged. With `reverse`, steps run
/// from the last position to the first, so a padded sequence is read from its
/// last real token backwards.
Tensor run_recurrent(const RecurrentCell& cell, const Tensor& x,
                     std::span<const std::size_t> lengths, bool reverse);

/// Forward and reversed passes with separate cells; concatenates the two
/// final states into [batch, 2 * hidden]. Passing the same cell twice ties
/// the directions.
class Bidirectional {
 public:
  Bidirectional(std::shared_ptr<const RecurrentCell> forward,
                std::shared_ptr<const RecurrentCell> backward);

  Tensor forward(const Tensor& x, std::span<const std::size_t> lengths) const;
  std::size_t output_size() const;
  NamedTensors parameters(const std::string& prefix) const;

 private:
  std::shared_ptr<const RecurrentCell> forward_;
  std::shared_ptr<const RecurrentCell> backward_;
};

}  // namespace PENS_REAL_ABI
}  // namespace pens
