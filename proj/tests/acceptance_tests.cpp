// Acceptance gate: twelve end-to-end checks over the full toolkit, each
// printing one PASS/FAIL line with its wall time. Run with no arguments for
// the whole gate, or pass criterion numbers to run a subset. Exits nonzero
// if any line fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uqtab/autoencoder.hpp"
#include "uqtab/bbb.hpp"
#include "uqtab/episode.hpp"
#include "uqtab/evaluation.hpp"
#include "uqtab/experiments.hpp"
#include "uqtab/features.hpp"
#include "uqtab/logreg.hpp"
#include "uqtab/matrix.hpp"
#include "uqtab/metrics.hpp"
#include "uqtab/mlp.hpp"
#include "uqtab/model.hpp"
#include "uqtab/numerics.hpp"
#include "uqtab/ppca.hpp"
#include "uqtab/rng.hpp"
#include "uqtab/search.hpp"
#include "uqtab/synthetic.hpp"
#include "uqtab/temperature.hpp"

using namespace uqtab;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

// Collects failure descriptions; a criterion passes when none accumulate.
struct Gate {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }

  template <typename T>
  void expect_near(T actual, T target, T tol, const std::string& what) {
    if (!(std::fabs(actual - target) <= tol)) {
      std::ostringstream msg;
      msg << what << ": got " << actual << ", want " << target << " +- " << tol;
      failures.push_back(msg.str());
    }
  }
};

struct Criterion {
  int id;
  std::string label;
  double budget_seconds;
  std::function<void(Gate&)> run;
};

std::string format_seconds(double s) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(s < 10 ? 2 : 1);
  out << s << "s";
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("uqtab_accept_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

std::vector<int> random_labels(int n, RngStream& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = rng.uniform() < 0.5 ? 0 : 1;
  return y;
}

Cohort synthetic_cohort(int n_patients, int n_variables, std::uint64_t seed,
                        std::vector<GroupSpec> groups = {}) {
  SyntheticCohortConfig config;
  config.n_patients = n_patients;
  config.n_variables = n_variables;
  config.seed = seed;
  config.groups = std::move(groups);
  return cohort_from_episodes(generate_synthetic_cohort(config));
}

// Flat parameter plumbing shared by the gradient checks; spans follow the
// library's canonical order (layer by layer, weights then biases).
std::vector<double> flat_copy(const std::vector<std::span<const double>>& spans) {
  std::vector<double> flat;
  for (const auto& s : spans) flat.insert(flat.end(), s.begin(), s.end());
  return flat;
}

void write_flat(std::span<const double> theta,
                const std::vector<std::span<double>>& spans) {
  std::size_t offset = 0;
  for (const auto& s : spans) {
    std::copy(theta.begin() + offset, theta.begin() + offset + s.size(), s.begin());
    offset += s.size();
  }
}

// ---------------------------------------------------------------------------
// Oracles (independent re-derivations, no production code paths)
// ---------------------------------------------------------------------------

// Twice the AUC numerator accumulated in integers, so ties stay exact.
double oracle_auc(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  long long numerator2 = 0, n_pos = 0, n_neg = 0;
  for (int label : labels) (label == 1 ? n_pos : n_neg)++;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) numerator2 += 2;
      else if (scores[i] == scores[j]) numerator2 += 1;
    }
  }
  return static_cast<double>(numerator2) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double student_t_pdf(double x, double nu) {
  return std::exp(std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0)) /
         std::sqrt(nu * M_PI) * std::pow(1.0 + x * x / nu, -(nu + 1.0) / 2.0);
}

// Two-sided p by composite Simpson over the t density: a numerical CDF
// oracle independent of the incomplete-beta route inside the library.
double oracle_two_sided_p(double t, double nu) {
  const double T = std::fabs(t);
  if (T == 0.0) return 1.0;
  const int panels = 40000;
  const double h = T / panels;
  double sum = student_t_pdf(0.0, nu) + student_t_pdf(T, nu);
  for (int i = 1; i < panels; ++i) {
    sum += student_t_pdf(i * h, nu) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return std::max(0.0, 1.0 - 2.0 * (sum * h / 3.0));
}

// Cyclic Jacobi eigensolver (ascending eigenvalues), for the subspace oracle.
void jacobi_eig(Matrix a, std::vector<double>& values, Matrix& vectors) {
  const int n = a.rows();
  vectors = Matrix(n, n);
  for (int i = 0; i < n; ++i) vectors(i, i) = 1.0;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
          const double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a(i, i);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return diag[i] < diag[j]; });
  Matrix sorted(n, n);
  for (int j = 0; j < n; ++j) {
    values[j] = diag[order[j]];
    for (int i = 0; i < n; ++i) sorted(i, j) = vectors(i, order[j]);
  }
  vectors = sorted;
}

// log N(x; mean, cov) through a dense D x D Cholesky — the naive route the
// production likelihood avoids.
double oracle_gaussian_loglik(const std::vector<double>& mean, Matrix cov,
                              std::span<const double> x) {
  const int d = cov.rows();
  for (int j = 0; j < d; ++j) {
    double diag = cov(j, j);
    for (int k = 0; k < j; ++k) diag -= cov(j, k) * cov(j, k);
    cov(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < d; ++i) {
      double v = cov(i, j);
      for (int k = 0; k < j; ++k) v -= cov(i, k) * cov(j, k);
      cov(i, j) = v / cov(j, j);
    }
  }
  std::vector<double> z(d);
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) {
    double v = x[i] - mean[i];
    for (int k = 0; k < i; ++k) v -= cov(i, k) * z[k];
    z[i] = v / cov(i, i);
    log_det += 2.0 * std::log(cov(i, i));
  }
  double quad = 0.0;
  for (double v : z) quad += v * v;
  return -0.5 * (d * std::log(2.0 * M_PI) + log_det + quad);
}

// ---------------------------------------------------------------------------
// Criterion 1: feature schema width
// ---------------------------------------------------------------------------

void criterion_feature_schema(Gate& gate) {
  SyntheticCohortConfig config;
  config.n_patients = 25;
  config.n_variables = 14;
  config.seed = 1;
  const std::vector<Episode> episodes = generate_synthetic_cohort(config);
  const std::vector<std::string> variables = collect_variables(episodes);
  gate.expect(variables.size() == 14,
              "expected 14 variables, got " + std::to_string(variables.size()));
  const FeatureMatrix features = engineer_features(episodes, variables);
  gate.expect(features.values.cols() == 588,
              "expected 588 feature columns, got " +
                  std::to_string(features.values.cols()));
  gate.expect(features.column_names.size() == 588,
              "column-name list does not match the matrix width");
}

// ---------------------------------------------------------------------------
// Criterion 2: uncertainty metric unit values
// ---------------------------------------------------------------------------

void criterion_metric_units(Gate& gate) {
  PredictionEnsemble extremes(2, 1);
  extremes(0, 0) = 0.0;
  extremes(1, 0) = 1.0;
  gate.expect_near(predictive_entropy(extremes).values[0], std::log(2.0), 1e-9,
                   "entropy of the {0,1} ensemble");

  PredictionEnsemble identical(3, 2);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 2; ++j) identical(k, j) = 0.37;
  for (double mi : mutual_information(identical).values) {
    gate.expect_near(mi, 0.0, 1e-9, "mutual information of identical members");
  }

  PredictionEnsemble spread(3, 1);
  spread(0, 0) = 0.2;
  spread(1, 0) = 0.4;
  spread(2, 0) = 0.6;
  const double std_value = class1_std(spread).values[0];
  gate.expect_near(std_value, std::sqrt(2.0 / 75.0), 1e-9,
                   "class-1 std of {0.2, 0.4, 0.6}");
  // The same target quoted at six decimal places.
  gate.expect_near(std_value, 0.163299, 5e-7, "class-1 std, printed precision");
}

// ---------------------------------------------------------------------------
// Criterion 3: AUC vs brute-force pair counting
// ---------------------------------------------------------------------------

void criterion_auc_oracle(Gate& gate) {
  RngStream rng(3003, "acceptance/auc", 0);
  int mismatches = 0;
  for (int instance = 0; instance < 1000; ++instance) {
    const int n = 2 + static_cast<int>(rng.uniform_int(199));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const bool with_ties = instance % 2 == 0;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      scores[i] = with_ties ? std::floor(u * 8.0) / 8.0 : u;
      labels[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    labels[0] = 1;  // both classes present
    labels[n - 1] = 0;
    if (auc_roc(scores, labels) != oracle_auc(scores, labels)) ++mismatches;
  }
  gate.expect(mismatches == 0,
              std::to_string(mismatches) + " of 1000 instances mismatched");
}

// ---------------------------------------------------------------------------
// Criterion 4: analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

void criterion_gradients(Gate& gate) {
  RngStream rng(4004, "acceptance/grad", 0);

  {  // Feed-forward BCE: 3 -> 4 -> 1 is 21 parameters.
    MlpArchitecture arch{3, {4}, 0.0};
    MlpParams params = init_mlp(arch, rng);
    for (auto& bias : params.biases)  // keep ReLU inputs off exact zero
      for (double& b : bias) b = 0.1 * rng.normal();
    const Matrix x = random_matrix(6, 3, rng);
    const std::vector<int> y = random_labels(6, rng);
    MlpGrad grad = zero_grad_like(params);
    mlp_loss_grad(params, x, y, nullptr, &grad);
    const std::vector<double> analytic = flat_copy(
        param_spans(std::as_const(grad.weights), std::as_const(grad.biases)));
    MlpParams work = params;
    const ScalarFn f = [&](std::span<const double> theta) {
      write_flat(theta, param_spans(work.weights, work.biases));
      return mlp_loss_grad(work, x, y, nullptr, nullptr);
    };
    const std::vector<double> theta = flat_copy(
        param_spans(std::as_const(params.weights), std::as_const(params.biases)));
    const double err = check_gradient(f, theta, analytic).max_relative_error;
    gate.expect(err < 1e-4, "network BCE gradient off by " + std::to_string(err));
  }

  {  // Regularized logistic regression: 5 weights + bias.
    const Matrix x = random_matrix(8, 5, rng);
    const std::vector<int> y = random_labels(8, rng);
    std::vector<double> weights(5);
    for (double& w : weights) w = 0.3 * rng.normal();
    const double bias = 0.2;
    const double c = 10.0;
    std::vector<double> analytic(6);
    logreg_objective(weights, bias, x, y, c, &analytic);
    const ScalarFn f = [&](std::span<const double> theta) {
      const std::vector<double> w(theta.begin(), theta.begin() + 5);
      return logreg_objective(w, theta[5], x, y, c, nullptr);
    };
    std::vector<double> theta = weights;
    theta.push_back(bias);
    const double err = check_gradient(f, theta, analytic).max_relative_error;
    gate.expect(err < 1e-4,
                "logistic regression gradient off by " + std::to_string(err));
  }

  {  // Autoencoder MSE: 3 -> 3 -> 2 -> 3 -> 3 is 41 parameters.
    AutoencoderModel model = init_autoencoder(3, {3}, 2, rng);
    for (auto& bias : model.biases)
      for (double& b : bias) b = 0.1 * rng.normal();
    const Matrix x = random_matrix(5, 3, rng);
    MlpGrad grad;
    grad.weights = model.weights;
    grad.biases = model.biases;
    ae_loss_grad(model, x, &grad);
    const std::vector<double> analytic = flat_copy(
        param_spans(std::as_const(grad.weights), std::as_const(grad.biases)));
    AutoencoderModel work = model;
    const ScalarFn f = [&](std::span<const double> theta) {
      write_flat(theta, param_spans(work.weights, work.biases));
      return ae_loss_grad(work, x, nullptr);
    };
    const std::vector<double> theta = flat_copy(
        param_spans(std::as_const(model.weights), std::as_const(model.biases)));
    const double err = check_gradient(f, theta, analytic).max_relative_error;
    gate.expect(err < 1e-4, "autoencoder gradient off by " + std::to_string(err));
  }

  {  // Variational network with frozen noise: 2 -> 2 -> 1 is 2 x 9 params.
    MlpArchitecture arch{2, {2}, 0.0};
    BbbPrior prior{0.4, 0.9, 0.4};
    BbbParams params = init_bbb(arch, prior, 0.1, -4.0, rng);
    const BbbNoise eps = draw_bbb_noise(params, rng);
    const Matrix x = random_matrix(5, 2, rng);
    const std::vector<int> y = random_labels(5, rng);
    BbbGrad grad = zero_grad_like(params);
    bbb_loss(params, x, y, 3, eps, nullptr, &grad);
    std::vector<double> analytic = flat_copy(
        param_spans(std::as_const(grad.mu_w), std::as_const(grad.mu_b)));
    const std::vector<double> rho_part = flat_copy(
        param_spans(std::as_const(grad.rho_w), std::as_const(grad.rho_b)));
    analytic.insert(analytic.end(), rho_part.begin(), rho_part.end());
    BbbParams work = params;
    const std::size_t n_mu =
        flat_copy(param_spans(std::as_const(params.mu_w), std::as_const(params.mu_b)))
            .size();
    const ScalarFn f = [&](std::span<const double> theta) {
      write_flat(theta.subspan(0, n_mu), param_spans(work.mu_w, work.mu_b));
      write_flat(theta.subspan(n_mu), param_spans(work.rho_w, work.rho_b));
      return bbb_loss(work, x, y, 3, eps, nullptr, nullptr);
    };
    std::vector<double> theta = flat_copy(
        param_spans(std::as_const(params.mu_w), std::as_const(params.mu_b)));
    const std::vector<double> rho_theta = flat_copy(
        param_spans(std::as_const(params.rho_w), std::as_const(params.rho_b)));
    theta.insert(theta.end(), rho_theta.begin(), rho_theta.end());
    const double err = check_gradient(f, theta, analytic).max_relative_error;
    gate.expect(err < 1e-4,
                "variational loss gradient off by " + std::to_string(err));
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: PPCA likelihood and subspace vs dense oracles
// ---------------------------------------------------------------------------

void criterion_ppca(Gate& gate) {
  RngStream rng(5005, "acceptance/ppca", 0);
  const std::vector<std::pair<int, int>> shapes = {{4, 1}, {7, 3}, {10, 6}, {10, 9}};
  for (const auto& [d, q] : shapes) {
    // Anisotropic data so the principal subspace is well separated.
    Matrix x(80, d);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < d; ++j)
        x(i, j) = rng.normal() * (1.0 + 1.5 * (d - j)) + 0.3 * j;
    const PpcaModel model = fit_ppca(x, q);

    // Likelihood: model covariance W W^T + sigma2 I against the dense oracle.
    Matrix cov(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double v = i == j ? model.sigma2 : 0.0;
        for (int k = 0; k < q; ++k) v += model.w(i, k) * model.w(j, k);
        cov(i, j) = v;
      }
    }
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> point(d);
      for (double& v : point) v = rng.normal() * 2.0;
      const double got = ppca_log_likelihood(model, point);
      const double want = oracle_gaussian_loglik(model.mean, cov, point);
      if (std::fabs(got - want) > 1e-8) {
        gate.expect(false, "log-likelihood off by " +
                               std::to_string(std::fabs(got - want)) + " at D=" +
                               std::to_string(d) + ", q=" + std::to_string(q));
        break;
      }
    }

    // Subspace: Gram-Schmidt the fitted W, then compare with the top-q
    // eigenvectors of the population covariance (independent Jacobi solve).
    // q - ||Q^T E||_F^2 equals the sum of squared principal-angle sines.
    Matrix s(d, d);
    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < d; ++j) mean[j] += x(i, j) / x.rows();
    for (int i = 0; i < x.rows(); ++i)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]) / x.rows();
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
    jacobi_eig(s, eigenvalues, eigenvectors);

    Matrix basis = model.w;  // orthonormalize columns in place
    for (int j = 0; j < q; ++j) {
      for (int k = 0; k < j; ++k) {
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += basis(i, j) * basis(i, k);
        for (int i = 0; i < d; ++i) basis(i, j) -= dot * basis(i, k);
      }
      double norm = 0.0;
      for (int i = 0; i < d; ++i) norm += basis(i, j) * basis(i, j);
      norm = std::sqrt(norm);
      for (int i = 0; i < d; ++i) basis(i, j) /= norm;
    }
    double overlap = 0.0;  // ||Q^T E||_F^2 over the top-q eigenvector block
    for (int j = 0; j < q; ++j) {
      for (int k = 0; k < q; ++k) {
        double dot = 0.0;
        for (int i = 0; i < d; ++i)
          dot += basis(i, j) * eigenvectors(i, d - 1 - k);
        overlap += dot * dot;
      }
    }
    // Residual < 1e-12 bounds every principal angle below 1e-6 radians.
    gate.expect(q - overlap < 1e-12,
                "subspace residual " + std::to_string(q - overlap) + " at D=" +
                    std::to_string(d) + ", q=" + std::to_string(q));
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: Welch's t-test fixed values and sign symmetry
// ---------------------------------------------------------------------------

void criterion_welch(Gate& gate) {
  const WelchResult fixed = welch_t_test({1.0, 2.0, 3.0}, {2.0, 3.0, 4.0});
  gate.expect_near(fixed.t_statistic, -1.224745, 1e-6, "t statistic");
  gate.expect_near(fixed.degrees_of_freedom, 4.0, 1e-6, "degrees of freedom");
  gate.expect_near(fixed.p_value,
                   oracle_two_sided_p(fixed.t_statistic, fixed.degrees_of_freedom),
                   1e-3, "two-sided p vs numerical CDF oracle");

  RngStream rng(6006, "acceptance/welch", 0);
  for (int pair = 0; pair < 100; ++pair) {
    const int na = 2 + static_cast<int>(rng.uniform_int(10));
    const int nb = 2 + static_cast<int>(rng.uniform_int(10));
    std::vector<double> a(na), b(nb);
    for (double& v : a) v = rng.normal() * 2.0;
    for (double& v : b) v = rng.normal() * 0.5 + 0.3;
    const WelchResult ab = welch_t_test(a, b);
    const WelchResult ba = welch_t_test(b, a);
    if (ab.t_statistic != -ba.t_statistic || ab.p_value != ba.p_value ||
        ab.degrees_of_freedom != ba.degrees_of_freedom) {
      gate.expect(false, "sign symmetry broken on pair " + std::to_string(pair));
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: null calibration (identity factor, zero-shift group)
// ---------------------------------------------------------------------------

void criterion_null_calibration(Gate& gate) {
  {  // Identity perturbation: exactly 0.5 for every (model, metric) row.
    const Cohort cohort = synthetic_cohort(320, 3, 71);
    ExperimentOptions options;
    options.master_seed = 73;
    const ExperimentReport report =
        perturbation_experiment(cohort, {1.0}, 2, options);
    std::set<std::string> models_seen;
    for (const ResultRow& row : report.rows) {
      models_seen.insert(row.model);
      if (row.mean != 0.5 || row.stdev != 0.0) {
        gate.expect(false, row.model + "/" + row.metric + " at factor 1: mean " +
                               std::to_string(row.mean) + ", std " +
                               std::to_string(row.stdev));
      }
    }
    gate.expect(report.rows.size() == 23,
                "expected 23 (model, metric) rows, got " +
                    std::to_string(report.rows.size()));
    gate.expect(models_seen.size() == model_registry().size(),
                "not every registry model produced rows");
  }

  {  // A zero-shift group is statistically unremarkable: every metric mean
     // over n = 5 runs stays within 0.5 +- 0.05.
    const Cohort cohort =
        synthetic_cohort(3000, 3, 79, {{"calm", 0.25, 0.0}});
    ExperimentOptions options;
    options.master_seed = 83;
    options.n_runs = 5;
    const ExperimentReport report =
        group_holdout_experiment(cohort, {"calm"}, options);
    for (const ResultRow& row : report.rows) {
      if (row.metric == "mortality_auc") continue;
      if (std::fabs(row.mean - 0.5) > 0.05) {
        gate.expect(false, row.model + "/" + row.metric + ": mean OOD AUC " +
                               std::to_string(row.mean) + " outside 0.5 +- 0.05");
      }
    }
    gate.expect(!report.rows.empty(), "holdout produced no rows");
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: density models detect exploded features, softmax metrics miss
// ---------------------------------------------------------------------------

void criterion_detection_separation(Gate& gate) {
  const Cohort cohort = synthetic_cohort(5000, 14, 88);
  ExperimentOptions options;
  options.master_seed = 89;
  options.models = {"PPCA", "AE", "NN"};
  const ExperimentReport report =
      perturbation_experiment(cohort, {10000.0}, 100, options);

  const auto mean_of = [&](const std::string& model,
                           const std::string& metric) -> double {
    for (const ResultRow& row : report.rows) {
      if (row.model == model && row.metric == metric) return row.mean;
    }
    gate.expect(false, "missing row " + model + "/" + metric);
    return std::numeric_limits<double>::quiet_NaN();
  };

  const double ppca = mean_of("PPCA", "novelty");
  const double ae = mean_of("AE", "novelty");
  const double nn_max_prob = mean_of("NN", "max_prob");
  const double nn_entropy = mean_of("NN", "entropy");
  gate.expect(ppca >= 0.99,
              "PPCA novelty AUC " + std::to_string(ppca) + " < 0.99");
  gate.expect(ae >= 0.95, "AE novelty AUC " + std::to_string(ae) + " < 0.95");
  gate.expect(nn_max_prob < 0.7,
              "NN max_prob AUC " + std::to_string(nn_max_prob) + " >= 0.7");
  gate.expect(nn_entropy < 0.7,
              "NN entropy AUC " + std::to_string(nn_entropy) + " >= 0.7");
}

// ---------------------------------------------------------------------------
// Criterion 9: hyperparameter search budgets, ranges, determinism
// ---------------------------------------------------------------------------

void criterion_search_contract(Gate& gate) {
  const std::vector<int> layer_sizes = {25, 30, 50, 75, 100};
  const std::vector<int> latent_sizes = {5, 10, 15, 20};
  const auto layer_ok = [&](const std::vector<int>& hidden) {
    if (hidden.empty() || hidden.size() > 4) return false;
    if (std::find(layer_sizes.begin(), layer_sizes.end(), hidden[0]) ==
        layer_sizes.end())
      return false;
    return std::all_of(hidden.begin(), hidden.end(),
                       [&](int h) { return h == hidden[0]; });
  };
  const auto lr_ok = [](double lr) { return lr >= 1e-4 && lr <= 0.1; };

  for (const std::string family : {"AE", "NN", "MCDropout", "BBB"}) {
    const int budget = default_search_budget(family);
    gate.expect(budget == (family == "BBB" ? 60 : 40),
                family + " default budget is " + std::to_string(budget));
    RngStream rng(9009, "acceptance/search/" + family, 0);
    for (int trial = 0; trial < budget; ++trial) {
      const Hyperparams hp = sample_hyperparams(family, trial, rng);
      bool ok = layer_ok(hp.hidden_sizes) && lr_ok(hp.learning_rate);
      if (family == "MCDropout")
        ok = ok && hp.dropout_rate >= 0.0 && hp.dropout_rate <= 0.5;
      if (family == "AE")
        ok = ok && std::find(latent_sizes.begin(), latent_sizes.end(),
                             hp.latent_dim) != latent_sizes.end();
      if (family == "BBB") {
        ok = ok && hp.mu_init >= -0.6 && hp.mu_init <= 0.6;
        ok = ok && hp.rho_init >= -8.0 && hp.rho_init <= -2.0;
        ok = ok && hp.prior_pi >= 0.1 && hp.prior_pi <= 0.9;
        for (double sigma : {hp.prior_sigma1, hp.prior_sigma2}) {
          ok = ok && sigma >= std::exp(-0.8) && sigma <= std::exp(0.1);
        }
      }
      if (!ok) {
        gate.expect(false, family + " trial " + std::to_string(trial) +
                               " sampled outside its range");
        break;
      }
    }
  }

  {  // The logistic-regression grid is walked in order.
    gate.expect(default_search_budget("LogReg") == 4,
                "LogReg default budget is not 4");
    RngStream rng(9009, "acceptance/search/LogReg", 0);
    const std::vector<double> grid = {10.0, 100.0, 1000.0, 10000.0};
    for (int trial = 0; trial < 8; ++trial) {
      const Hyperparams hp = sample_hyperparams("LogReg", trial, rng);
      gate.expect(hp.inverse_l2 == grid[trial % 4],
                  "LogReg trial " + std::to_string(trial) + " drew C = " +
                      std::to_string(hp.inverse_l2));
    }
  }

  {  // Smoke search: budget 5, deterministic under the seed, best = argmin.
    RngStream rng(9119, "acceptance/search-data", 0);
    const Matrix x_train = random_matrix(60, 6, rng);
    const Matrix x_val = random_matrix(25, 6, rng);
    const std::vector<int> y_train = random_labels(60, rng);
    const std::vector<int> y_val = random_labels(25, rng);
    const SearchResult first =
        random_search("NN", 5, x_train, y_train, x_val, y_val, 77);
    const SearchResult second =
        random_search("NN", 5, x_train, y_train, x_val, y_val, 77);
    gate.expect(search_result_to_json(first) == search_result_to_json(second),
                "budget-5 searches with one seed disagreed");
    gate.expect(first.trials.size() == 5, "expected 5 recorded trials");
    int argmin = -1;
    for (const TrialRecord& trial : first.trials) {
      if (trial.diverged) continue;
      if (argmin < 0 || trial.val_loss < first.trials[argmin].val_loss)
        argmin = trial.trial;
    }
    gate.expect(first.best_trial == argmin,
                "best trial " + std::to_string(first.best_trial) +
                    " is not the validation-loss argmin");
  }
}

// ---------------------------------------------------------------------------
// Criterion 10: early stopping and temperature calibration contracts
// ---------------------------------------------------------------------------

void criterion_training_contracts(Gate& gate) {
  RngStream rng(1010, "acceptance/contracts", 0);
  {  // Returned parameters achieve the minimum recorded validation loss.
    const Matrix x_train = random_matrix(80, 5, rng);
    const Matrix x_val = random_matrix(30, 5, rng);
    const std::vector<int> y_train = random_labels(80, rng);
    const std::vector<int> y_val = random_labels(30, rng);
    TrainConfig config;
    config.max_epochs = 40;
    config.patience = 5;
    config.batch_size = 16;
    config.learning_rate = 5e-3;
    RngStream train_rng(1010, "acceptance/contracts/train", 1);
    const MlpTrainResult result = train_mlp(config, {5, {8}, 0.0}, x_train,
                                            y_train, x_val, y_val, train_rng);
    double min_val = std::numeric_limits<double>::infinity();
    for (const EpochStats& epoch : result.trace.epochs)
      min_val = std::min(min_val, epoch.val_loss);
    const double returned_val =
        mlp_loss_grad(result.params, x_val, y_val, nullptr, nullptr);
    gate.expect_near(returned_val, min_val, 1e-12,
                     "validation BCE of the returned parameters");
    const int best = result.trace.best_epoch;
    gate.expect(result.trace.epochs[best].val_loss == min_val,
                "best_epoch does not point at the minimum");
    gate.expect(static_cast<int>(result.trace.epochs.size()) - 1 - best <=
                    config.patience,
                "training continued past the patience window");
  }

  {  // Calibration never worsens the validation BCE.
    for (int instance = 0; instance < 30; ++instance) {
      const int n = 20 + static_cast<int>(rng.uniform_int(80));
      std::vector<double> logits(n);
      std::vector<int> labels(n);
      for (int i = 0; i < n; ++i) {
        logits[i] = rng.normal() * 3.0;
        labels[i] = rng.uniform() < 0.5 ? 0 : 1;
      }
      const double t = fit_temperature(logits, labels);
      if (scaled_bce(logits, labels, t) >
          scaled_bce(logits, labels, 1.0) + 1e-9) {
        gate.expect(false, "calibration raised validation BCE on instance " +
                               std::to_string(instance));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 11: end-to-end pipeline determinism (two runs, --jobs 1 vs 4)
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path, Gate& gate) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) {
    gate.expect(false, "missing output file " + path);
    return {};
  }
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void criterion_pipeline_determinism(Gate& gate) {
  const std::string cli = UQTAB_CLI_PATH;
  TempDir dir("pipeline");
  const auto run = [&](const std::string& args) {
    const std::string command = "env -u UQTAB_SEED \"" + cli + "\" " + args +
                                " > /dev/null 2> \"" + dir.file("err") + "\"";
    const int status = std::system(command.c_str());
    const bool ok = status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    if (!ok) gate.expect(false, "command failed: " + args);
    return ok;
  };

  for (const std::string tag : {"r1", "r2", "r4"}) {
    const std::string jobs = tag == "r4" ? "4" : "1";
    const std::string base = dir.file(tag);
    if (!run("synth --seed 93 --patients 120 --variables 3 --out " + base))
      return;
    if (!run("featurize --timeseries " + base + "/timeseries.csv --labels " +
             base + "/labels.csv --out " + base))
      return;
    if (!run("tune --model NN --budget 2 --seed 93 --features " + base +
             "/features.csv --labels " + base + "/labels.csv --jobs " + jobs +
             " --out " + base))
      return;
    if (!run("perturb --seed 93 --features " + base + "/features.csv" +
             " --labels " + base + "/labels.csv --models NN,PPCA --tuned " +
             base + "/tune_NN.json --repeats 5 --jobs " + jobs + " --out " +
             base))
      return;
  }

  const std::string tune_one = slurp(dir.file("r1/tune_NN.json"), gate);
  const std::string report_one =
      slurp(dir.file("r1/perturbation_seed93.json"), gate);
  gate.expect(!report_one.empty(), "first run produced an empty report");
  gate.expect(slurp(dir.file("r2/tune_NN.json"), gate) == tune_one,
              "tune output changed between identical runs");
  gate.expect(slurp(dir.file("r2/perturbation_seed93.json"), gate) == report_one,
              "perturbation report changed between identical runs");
  gate.expect(slurp(dir.file("r4/perturbation_seed93.json"), gate) == report_one,
              "perturbation report changed between --jobs 1 and --jobs 4");
}

// ---------------------------------------------------------------------------
// Criterion 12: mortality table roster
// ---------------------------------------------------------------------------

void criterion_mortality_roster(Gate& gate) {
  const Cohort cohort = synthetic_cohort(800, 3, 97);
  ExperimentOptions options;
  options.master_seed = 101;
  options.n_runs = 5;
  const ExperimentReport report = evaluate_mortality(cohort, options);

  const std::vector<std::string> roster = {
      "AnchoredNNEnsemble", "BBB",        "BootstrappedNNEnsemble",
      "LogReg",             "MCDropout",  "NNEnsemble",
      "NN",                 "PlattScalingNN"};
  gate.expect(report.rows.size() == roster.size(),
              "expected " + std::to_string(roster.size()) + " rows, got " +
                  std::to_string(report.rows.size()));
  for (std::size_t i = 0; i < roster.size() && i < report.rows.size(); ++i) {
    const ResultRow& row = report.rows[i];
    if (row.model != roster[i]) {
      gate.expect(false, "row " + std::to_string(i) + " is " + row.model +
                             ", want " + roster[i]);
      continue;
    }
    gate.expect(row.metric == "mortality_auc", row.model + ": wrong metric");
    gate.expect(row.n == 5, row.model + ": n != 5");
    gate.expect(row.has_std && row.stdev >= 0.0 && std::isfinite(row.stdev),
                row.model + ": missing std");
    gate.expect(row.mean >= 0.0 && row.mean <= 1.0,
                row.model + ": AUC outside [0, 1]");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "14-variable cohorts featurize to 588 columns", 1.0,
       criterion_feature_schema},
      {2, "uncertainty metrics hit their closed-form unit values", 1.0,
       criterion_metric_units},
      {3, "AUC matches brute-force pair counting on 1000 instances", 10.0,
       criterion_auc_oracle},
      {4, "analytic gradients match central finite differences", 10.0,
       criterion_gradients},
      {5, "PPCA likelihood and subspace match dense oracles", 5.0,
       criterion_ppca},
      {6, "Welch's t-test matches fixed values and stays sign-symmetric", 5.0,
       criterion_welch},
      {7, "null perturbation and zero-shift holdout stay at AUC 0.5", 300.0,
       criterion_null_calibration},
      {8, "density models flag exploded features; softmax metrics do not",
       900.0, criterion_detection_separation},
      {9, "search honors budgets, ranges, and seed determinism", 300.0,
       criterion_search_contract},
      {10, "early stopping returns the best epoch; calibration never hurts",
       60.0, criterion_training_contracts},
      {11, "pipeline reruns and --jobs 1 vs 4 are byte-identical", 600.0,
       criterion_pipeline_determinism},
      {12, "mortality table lists all eight classifiers over five runs", 600.0,
       criterion_mortality_roster},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int n_failed = 0;
  for (const Criterion& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.id)) continue;
    Gate gate;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(gate);
    } catch (const std::exception& e) {
      gate.expect(false, std::string("threw: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (seconds > criterion.budget_seconds) {
      gate.expect(false, format_seconds(seconds) + " exceeds the " +
                             format_seconds(criterion.budget_seconds) +
                             " budget");
    }
    const bool pass = gate.failures.empty();
    n_failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << criterion.id
              << ": " << criterion.label << " (" << format_seconds(seconds)
              << " / " << format_seconds(criterion.budget_seconds) << ")\n";
    for (const std::string& failure : gate.failures) {
      std::cout << "       - " << failure << "\n";
    }
  }
  std::cout << (n_failed == 0 ? "acceptance gate: all criteria passed"
                              : "acceptance gate: " + std::to_string(n_failed) +
                                    " criteria FAILED")
            << "\n";
  return n_failed == 0 ? 0 : 1;
}
