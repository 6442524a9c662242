#include "uqtab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace uqtab {

namespace {
// Largest double strictly below 1.
const double kOneBelow = std::nextafter(1.0, 0.0);
}  // namespace

double sigmoid(double x) {
  double p;
  if (x >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    p = e / (1.0 + e);
  }
  if (p >= 1.0) p = kOneBelow;
  if (p <= 0.0) p = std::numeric_limits<double>::min();
  return p;
}

double log1pexp(double x) {
  if (x > 36.0) return x;  // exp(-x) below double epsilon
  if (x < -745.0) return 0.0;
  return std::log1p(std::exp(x));
}

double bce_from_logit(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + log1pexp(-std::fabs(logit));
}

double logsumexp2(double a, double b) {
  if (std::isinf(a) && a < 0.0) return b;
  if (std::isinf(b) && b < 0.0) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double relative_error(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
  return std::fabs(a - b) / denom;
}

std::vector<double> finite_diff_grad(const ScalarFn& f,
                                     std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<double> point(theta.begin(), theta.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    double fp = f(point);
    point[i] = orig - h;
    double fm = f(point);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_grad: non-finite value at coordinate " +
                               std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

GradCheckResult check_gradient(const ScalarFn& f, std::span<const double> theta,
                               std::span<const double> analytic_grad, double h) {
  auto numeric = finite_diff_grad(f, theta, h);
  GradCheckResult result;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    double err = relative_error(analytic_grad[i], numeric[i]);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

}  // namespace uqtab
