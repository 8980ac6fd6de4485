#include "pens/optim.hpp"

#include <cmath>

#include "pens/error.hpp"

namespace pens {
inline namespace PENS_REAL_ABI {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw Error("Adam: parameter is not tracked");
    m_.emplace_back(p.size(), Real(0));
    v_.emplace_back(p.size(), Real(0));
  }
}

void Adam::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const auto b1 = static_cast<Real>(config_.beta1);
  const auto b2 = static_cast<Real>(config_.beta2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k].data();
    auto grad = params_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const Real g = grad[i];
      m[i] = b1 * m[i] + (Real(1) - b1) * g;
      v[i] = b2 * v[i] + (Real(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[i]) / c1;
      const double v_hat = static_cast<double>(v[i]) / c2;
      value[i] -= static_cast<Real>(config_.learning_rate * m_hat /
                                    (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace PENS_REAL_ABI
}  // namespace pens
