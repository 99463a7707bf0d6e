#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "homog/errors.hpp"

namespace homog {

// Welford running mean/variance.
class RunningMeanVar {
public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double var_sample() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double sem() const { return n_ > 0 ? std::sqrt(var_sample() / static_cast<double>(n_)) : 0.0; }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Mean and standard error of a set of batch means.
inline void batch_mean_sem(const std::vector<double>& batches, double* mean, double* sem) {
  RunningMeanVar acc;
  for (double b : batches) acc.add(b);
  if (mean) *mean = acc.mean();
  if (sem) *sem = acc.sem();
}

// Composite Simpson rule on [a,b]. Panels is rounded up to an even count.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientData("ls_slope: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InsufficientData("ls_slope: degenerate abscissa");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace homog
