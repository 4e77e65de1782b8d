#pragma once

#include <cmath>

namespace hdmean::detail {

// Neumaier-compensated accumulator. Reductions over p coordinates mix terms
// spanning several orders of magnitude (gene-expression data reaches p > 2000
// with highly uneven scales), so plain left-to-right summation is not enough.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace hdmean::detail
