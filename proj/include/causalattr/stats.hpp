#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace causalattr {

// Neumaier-compensated accumulator. Keeps long reductions stable so the
// same sum comes out regardless of how work is chunked.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(std::span<const double> xs);
// Unbiased (divides by n-1). Throws on fewer than two values.
double sample_variance(std::span<const double> xs);
double stddev(std::span<const double> xs);
// Order statistic with linear interpolation between adjacent ranks.
double quantile(std::span<const double> xs, double q);

double normal_cdf(double z);
// Inverse standard normal CDF, |error| below 1e-12 on (0,1).
double normal_quantile(double p);

}  // namespace causalattr
