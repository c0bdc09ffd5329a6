#pragma once

#include <cmath>
#include <span>

namespace upisp {

// Neumaier-compensated accumulator. Keeps reductions stable regardless of
// how a batch is split across workers.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) noexcept {
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value();
}

inline double compensated_mean(std::span<const double> values) noexcept {
  return values.empty() ? 0.0 : compensated_sum(values) / static_cast<double>(values.size());
}

constexpr double sign_or_zero(double v) noexcept {
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

}  // namespace upisp
