#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace upisp::mapper {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

// Adam with decoupled weight decay:
//   p <- p - lr * (wd * p + m_hat / (sqrt(v_hat) + eps))
class AdamW {
 public:
  AdamW(std::size_t parameter_count, AdamWConfig cfg);

  void step(std::span<double> params, std::span<const double> grad);

  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace upisp::mapper
