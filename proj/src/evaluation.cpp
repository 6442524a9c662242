#include "uqtab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "uqtab/kernels.hpp"

namespace uqtab {
namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cont_frac(double a, double b, double x) {
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

double sample_mean_var(const std::vector<double>& v, double* var_out) {
  const double n = static_cast<double>(v.size());
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) {
    const double d = x - mean;
    ss += d * d;
  }
  *var_out = ss / (n - 1.0);
  return mean;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) {
    throw std::runtime_error("incomplete beta needs a, b > 0");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(log_front);
  // The continued fraction converges fast only on its own side of the mean.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cont_frac(a, b, x) / a;
  }
  return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const int n = static_cast<int>(scores.size());
  if (n == 0 || labels.size() != scores.size()) {
    throw std::runtime_error("auc_roc: scores and labels must be same-size, non-empty");
  }
  std::int64_t n_pos = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::runtime_error("auc_roc: labels must be 0 or 1");
    }
    if (std::isnan(scores[i])) throw std::runtime_error("auc_roc: NaN score");
    n_pos += labels[i];
  }
  const std::int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::runtime_error("auc_roc: both classes must be present");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // Midranks over tie groups. For a group occupying 1-based ranks i..j the
  // midrank is (i+j)/2; accumulating 2*midrank = i+j keeps everything in
  // integers, so tie-heavy inputs (e.g. all scores equal) come out exact.
  std::int64_t twice_rank_sum_pos = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::int64_t twice_midrank = static_cast<std::int64_t>(i + 1) + (j + 1);
    for (int k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum_pos += twice_midrank;
    }
    i = j + 1;
  }
  // Mann-Whitney U = rank_sum_pos - n_pos(n_pos+1)/2; AUC = U / (n_pos n_neg).
  const std::int64_t twice_u = twice_rank_sum_pos - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) *
                                         static_cast<double>(n_neg));
}

double ood_auc(const std::vector<double>& id_scores,
               const std::vector<double>& ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw std::runtime_error("ood_auc: both score sets must be non-empty");
  }
  std::vector<double> scores;
  scores.reserve(id_scores.size() + ood_scores.size());
  std::vector<int> labels;
  labels.reserve(scores.capacity());
  for (double s : id_scores) {
    scores.push_back(s);
    labels.push_back(0);
  }
  for (double s : ood_scores) {
    scores.push_back(s);
    labels.push_back(1);
  }
  return auc_roc(scores, labels);
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::runtime_error("welch_t_test: need at least 2 samples per side");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double va = 0.0, vb = 0.0;
  const double ma = sample_mean_var(a, &va);
  const double mb = sample_mean_var(b, &vb);

  WelchResult r;
  const double sa = va / na;
  const double sb = vb / nb;
  const double denom2 = sa + sb;
  if (denom2 <= 0.0) {
    // Both sides constant: the statistic is undefined, report null.
    r.degenerate = true;
    r.t_statistic = 0.0;
    r.degrees_of_freedom = na + nb - 2.0;
    r.p_value = 1.0;
    return r;
  }
  r.t_statistic = (ma - mb) / std::sqrt(denom2);
  r.degrees_of_freedom =
      denom2 * denom2 /
      (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // Two-sided p: P(|T_nu| > |t|) = I_x(nu/2, 1/2) with x = nu/(t^2+nu).
  const double nu = r.degrees_of_freedom;
  const double t2 = r.t_statistic * r.t_statistic;
  r.p_value = regularized_incomplete_beta(nu / 2.0, 0.5, nu / (t2 + nu));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

double significant_fraction(const Matrix& id_rows, const Matrix& ood_rows,
                            double alpha) {
  if (id_rows.cols() != ood_rows.cols()) {
    throw std::runtime_error("significant_fraction: column count mismatch");
  }
  const int d = id_rows.cols();
  if (d == 0) return 0.0;
  std::vector<int> significant(d, 0);
  kernels::parallel_for(d, [&](int j) {
    if (id_rows.rows() < 2 || ood_rows.rows() < 2) return;
    std::vector<double> a(id_rows.rows());
    std::vector<double> b(ood_rows.rows());
    for (int i = 0; i < id_rows.rows(); ++i) a[i] = id_rows(i, j);
    for (int i = 0; i < ood_rows.rows(); ++i) b[i] = ood_rows(i, j);
    // A constant column on either side makes the test unreliable; treat it
    // as not significant rather than trusting a one-sided variance.
    double va = 0.0, vb = 0.0;
    sample_mean_var(a, &va);
    sample_mean_var(b, &vb);
    if (va <= 0.0 || vb <= 0.0) return;
    const WelchResult w = welch_t_test(a, b);
    if (w.p_value < alpha) significant[j] = 1;
  });
  const int hits = std::accumulate(significant.begin(), significant.end(), 0);
  return static_cast<double>(hits) / d;
}

double significant_feature_fraction(const FeatureMatrix& x_id,
                                    const FeatureMatrix& x_ood, double alpha) {
  if (x_id.column_names != x_ood.column_names) {
    throw std::runtime_error("significant_feature_fraction: column schema mismatch");
  }
  return significant_fraction(x_id.values, x_ood.values, alpha);
}

}  // namespace uqtab
