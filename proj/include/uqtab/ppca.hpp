#pragma once

#include <span>
#include <vector>

#include "uqtab/matrix.hpp"

namespace uqtab {

// Probabilistic PCA fitted by the maximum-likelihood closed form. The model
// covariance is C = W W^T + sigma2 I; log densities are evaluated through
// the q x q matrix M = sigma2 I + W^T W, never a D x D solve.
struct PpcaModel {
  std::vector<double> mean;      // D
  Matrix w;                      // D x q, principal columns first
  double sigma2 = 1.0;
  bool sigma2_floored = false;   // rank deficiency forced sigma2 to the floor
  // Cached decomposition for fast likelihoods.
  Matrix m_chol;                 // lower Cholesky factor of M
  double log_det_c = 0.0;        // log |C| = (D-q) log sigma2 + log |M|
};

// mu = column means; S = population covariance; sigma2 = mean of the D-q
// smallest eigenvalues of S (floored at 1e-9, flagged); W = U_q sqrt(Lq -
// sigma2 I), negative scales clamped to zero.
PpcaModel fit_ppca(const Matrix& x, int q);

// Rebuilds the cached Cholesky/log-det from mean, w, sigma2 (used after
// loading a persisted model).
void ppca_refresh_cache(PpcaModel* model);

double ppca_log_likelihood(const PpcaModel& model, std::span<const double> x);

// Per-row log likelihoods, parallel over rows.
std::vector<double> ppca_log_likelihood_rows(const PpcaModel& model, const Matrix& x);

}  // namespace uqtab
