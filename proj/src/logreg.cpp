#include "uqtab/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uqtab/kernels.hpp"
#include "uqtab/numerics.hpp"

namespace uqtab {
namespace {

// logits_i = x_i . w + b, parallel over rows (independent dot products).
void linear_logits(const std::vector<double>& w, double b, const Matrix& x,
                   std::vector<double>* out) {
  out->resize(x.rows());
  kernels::parallel_for(x.rows(), [&](int i) {
    const double* row = x.row(i);
    double z = b;
    for (int j = 0; j < x.cols(); ++j) z += row[j] * w[j];
    (*out)[i] = z;
  });
}

}  // namespace

double logreg_objective(const std::vector<double>& weights, double bias,
                        const Matrix& x, const std::vector<int>& y, double c,
                        std::vector<double>* grad) {
  const int n = x.rows();
  const int d = x.cols();
  std::vector<double> logits;
  linear_logits(weights, bias, x, &logits);

  double data = 0.0;
  for (int i = 0; i < n; ++i) {
    data += bce_from_logit(logits[i], static_cast<double>(y[i]));
  }
  data /= n;
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  penalty /= 2.0 * c * n;

  if (grad) {
    grad->assign(d + 1, 0.0);
    std::vector<double> residual(n);
    for (int i = 0; i < n; ++i) {
      residual[i] = (sigmoid(logits[i]) - static_cast<double>(y[i])) / n;
    }
    // grad_w = X^T residual + w / (C N); columns are independent slots.
    kernels::parallel_for(d, [&](int j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += x(i, j) * residual[i];
      (*grad)[j] = s + weights[j] / (c * n);
    });
    double rb = 0.0;
    for (int i = 0; i < n; ++i) rb += residual[i];
    (*grad)[d] = rb;
  }
  return data + penalty;
}

LogRegModel train_logreg(const Matrix& x, const std::vector<int>& y, double c) {
  if (x.rows() < 1 || static_cast<int>(y.size()) != x.rows()) {
    throw std::runtime_error("logreg: rows and labels must match and be non-empty");
  }
  if (!(c > 0.0)) throw std::runtime_error("logreg: C must be > 0");
  for (int v : y) {
    if (v != 0 && v != 1) throw std::runtime_error("logreg: labels must be 0 or 1");
  }
  const int d = x.cols();
  constexpr int kMaxIters = 5000;
  constexpr double kGradTol = 1e-6;

  LogRegModel model;
  model.weights.assign(d, 0.0);
  model.bias = 0.0;
  model.inverse_l2 = c;

  std::vector<double> grad;
  double f = logreg_objective(model.weights, model.bias, x, y, c, &grad);
  double step = 1.0;
  model.converged = false;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    double gmax = 0.0;
    double gnorm2 = 0.0;
    for (double g : grad) {
      gmax = std::max(gmax, std::abs(g));
      gnorm2 += g * g;
    }
    if (gmax < kGradTol) {
      model.converged = true;
      break;
    }
    // Backtracking (Armijo): shrink until the sufficient-decrease condition
    // holds; the accepted step seeds the next iteration, slightly grown.
    std::vector<double> w_try(d);
    double b_try = 0.0;
    double f_try = f;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (int j = 0; j < d; ++j) w_try[j] = model.weights[j] - step * grad[j];
      b_try = model.bias - step * grad[d];
      f_try = logreg_objective(w_try, b_try, x, y, c, nullptr);
      if (f_try <= f - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflowed; gradient check below decides
    model.weights = std::move(w_try);
    model.bias = b_try;
    f = logreg_objective(model.weights, model.bias, x, y, c, &grad);
    step = std::min(step * 2.0, 1e4);
  }
  if (!model.converged) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    model.converged = gmax < kGradTol;
  }
  return model;
}

std::vector<double> logreg_logits(const LogRegModel& model, const Matrix& x) {
  if (x.cols() != static_cast<int>(model.weights.size())) {
    throw std::runtime_error("logreg: feature dimension does not match the model");
  }
  std::vector<double> logits;
  linear_logits(model.weights, model.bias, x, &logits);
  return logits;
}

std::vector<double> logreg_predict_proba(const LogRegModel& model, const Matrix& x) {
  std::vector<double> p = logreg_logits(model, x);
  for (double& v : p) v = sigmoid(v);
  return p;
}

}  // namespace uqtab
