#pragma once

#include <vector>

#include "uqtab/matrix.hpp"

namespace uqtab {

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double inverse_l2 = 10.0;  // C: larger = weaker regularization
  bool converged = true;     // false when the iteration cap was hit
};

// Mean objective: (1/N) sum BCE(w.x + b, y) + ||w||^2 / (2 C N), the bias
// unpenalized. Fills the gradient over (weights..., bias) when grad != null.
double logreg_objective(const std::vector<double>& weights, double bias,
                        const Matrix& x, const std::vector<int>& y, double c,
                        std::vector<double>* grad);

// Full-batch gradient descent with backtracking line search from a zero
// start (the objective is convex, so the run is deterministic). Stops at
// max-norm(gradient) < 1e-6 or an iteration cap; hitting the cap only sets
// converged = false.
LogRegModel train_logreg(const Matrix& x, const std::vector<int>& y, double c);

std::vector<double> logreg_predict_proba(const LogRegModel& model, const Matrix& x);
std::vector<double> logreg_logits(const LogRegModel& model, const Matrix& x);

}  // namespace uqtab
