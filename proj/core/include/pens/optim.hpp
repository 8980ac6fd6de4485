#pragma once

#include <cstdint>
#include <vector>

#include "pens/tensor.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// Adam with bias correction. Holds one first/second moment buffer per
/// parameter, shaped like the parameter.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  /// Applies one update from the current gradients and increments the step.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<Real>>& first_moments() const { return m_; }
  const std::vector<std::vector<Real>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace PENS_REAL_ABI
}  // namespace pens
