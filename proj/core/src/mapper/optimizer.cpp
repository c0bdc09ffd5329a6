#include "upisp/mapper/optimizer.hpp"

#include <cmath>

#include "upisp/errors.hpp"

namespace upisp::mapper {

void AdamWConfig::validate() const {
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("learning rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
    throw ConfigError("weight decay must be finite and >= 0");
  }
}

AdamW::AdamW(std::size_t parameter_count, AdamWConfig cfg)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  cfg_.validate();
}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("optimizer: parameter/gradient size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double update = (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    params[i] -= cfg_.lr * (cfg_.weight_decay * params[i] + update);
  }
}

}  // namespace upisp::mapper
