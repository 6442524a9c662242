#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace uqtab {

// Logistic function, stable over the full double range. The result is
// clamped into the open interval (0, 1): saturation at large |x| returns
// the closest representable value instead of exactly 0 or 1.
double sigmoid(double x);

// log(1 + exp(x)) without overflow.
double log1pexp(double x);

// softplus(x) = log(1 + exp(x)) and its derivative sigmoid(x).
inline double softplus(double x) { return log1pexp(x); }

// Binary cross-entropy of a single logit against a {0,1} label, evaluated
// in logit space: max(z,0) - z*y + log(1+exp(-|z|)).
double bce_from_logit(double logit, double label);

// log(exp(a) + exp(b)), tolerating -inf inputs.
double logsumexp2(double a, double b);

// |a-b| / max(|a|, |b|, 1e-12)
double relative_error(double a, double b);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
};

using ScalarFn = std::function<double(std::span<const double>)>;

// Central finite differences (f(theta + h e_i) - f(theta - h e_i)) / (2h)
// per coordinate. Throws if f evaluates to a non-finite value, naming the
// coordinate. h defaults to 1e-5, a reasonable trade between truncation
// and round-off in 64-bit arithmetic.
std::vector<double> finite_diff_grad(const ScalarFn& f,
                                     std::span<const double> theta,
                                     double h = 1e-5);

// Compares an analytic gradient against finite differences of f.
GradCheckResult check_gradient(const ScalarFn& f, std::span<const double> theta,
                               std::span<const double> analytic_grad,
                               double h = 1e-5);

}  // namespace uqtab
