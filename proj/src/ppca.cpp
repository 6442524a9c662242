#include "uqtab/ppca.hpp"

#include <cmath>
#include <stdexcept>

#include "uqtab/eigen_sym.hpp"
#include "uqtab/kernels.hpp"

namespace uqtab {
namespace {

constexpr double kSigma2Floor = 1e-9;
constexpr double kLog2Pi = 1.8378770664093453;

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
Matrix cholesky(const Matrix& a) {
  const int n = a.rows();
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("ppca: M is not positive definite");
        l(i, j) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Solves (L L^T) s = t in place of t.
void cholesky_solve(const Matrix& l, std::vector<double>* t) {
  const int n = l.rows();
  std::vector<double>& v = *t;
  for (int i = 0; i < n; ++i) {
    double s = v[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * v[k];
    v[i] = s / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = v[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * v[k];
    v[i] = s / l(i, i);
  }
}

}  // namespace

void ppca_refresh_cache(PpcaModel* model) {
  const int d = static_cast<int>(model->mean.size());
  const int q = model->w.cols();
  Matrix m(q, q);
  kernels::matmul_tn(model->w.data(), model->w.data(), m.data(), q, d, q);
  for (int i = 0; i < q; ++i) m(i, i) += model->sigma2;
  model->m_chol = cholesky(m);
  double log_det_m = 0.0;
  for (int i = 0; i < q; ++i) log_det_m += 2.0 * std::log(model->m_chol(i, i));
  model->log_det_c = (d - q) * std::log(model->sigma2) + log_det_m;
}

PpcaModel fit_ppca(const Matrix& x, int q) {
  const int n = x.rows();
  const int d = x.cols();
  if (q < 1 || q >= d) throw std::runtime_error("ppca: need 1 <= q < D");
  if (n <= q) throw std::runtime_error("ppca: need more rows than components");

  PpcaModel model;
  model.mean.assign(d, 0.0);
  kernels::parallel_for(d, [&](int j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x(i, j);
    model.mean[j] = s / n;
  });

  Matrix centered(n, d);
  kernels::parallel_for(n, [&](int i) {
    const double* src = x.row(i);
    double* dst = centered.row(i);
    for (int j = 0; j < d; ++j) dst[j] = src[j] - model.mean[j];
  });

  Matrix cov(d, d);
  kernels::matmul_tn(centered.data(), centered.data(), cov.data(), d, n, d);
  for (double& v : cov.storage()) v /= n;

  std::vector<double> evals;  // ascending
  Matrix evecs;
  sym_eig(cov, evals, evecs);

  double residual = 0.0;
  for (int j = 0; j < d - q; ++j) residual += evals[j];
  model.sigma2 = residual / (d - q);
  if (model.sigma2 < kSigma2Floor) {
    model.sigma2 = kSigma2Floor;
    model.sigma2_floored = true;
  }

  // Column c of W: the (c+1)-th largest eigenpair, scaled by
  // sqrt(lambda - sigma2), clamped when the spectrum dips below sigma2.
  model.w = Matrix(d, q);
  for (int c = 0; c < q; ++c) {
    const int src = d - 1 - c;
    const double scale = std::sqrt(std::max(evals[src] - model.sigma2, 0.0));
    for (int r = 0; r < d; ++r) model.w(r, c) = evecs(r, src) * scale;
  }
  ppca_refresh_cache(&model);
  return model;
}

double ppca_log_likelihood(const PpcaModel& model, std::span<const double> x) {
  const int d = static_cast<int>(model.mean.size());
  const int q = model.w.cols();
  if (static_cast<int>(x.size()) != d) {
    throw std::runtime_error("ppca: dimension mismatch");
  }
  std::vector<double> diff(d);
  double dd = 0.0;
  for (int j = 0; j < d; ++j) {
    diff[j] = x[j] - model.mean[j];
    dd += diff[j] * diff[j];
  }
  // t = W^T diff, then the Woodbury-style quadratic form
  // diff^T C^{-1} diff = (diff.diff - t . M^{-1} t) / sigma2.
  std::vector<double> t(q, 0.0);
  for (int j = 0; j < d; ++j) {
    const double* wrow = model.w.row(j);
    for (int c = 0; c < q; ++c) t[c] += wrow[c] * diff[j];
  }
  std::vector<double> s = t;
  cholesky_solve(model.m_chol, &s);
  double ts = 0.0;
  for (int c = 0; c < q; ++c) ts += t[c] * s[c];
  const double quad = (dd - ts) / model.sigma2;
  return -0.5 * (d * kLog2Pi + model.log_det_c + quad);
}

std::vector<double> ppca_log_likelihood_rows(const PpcaModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  kernels::parallel_for(x.rows(), [&](int i) {
    out[i] = ppca_log_likelihood(model, x.row_span(i));
  });
  return out;
}

}  // namespace uqtab
