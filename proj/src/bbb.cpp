#include "uqtab/bbb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "uqtab/numerics.hpp"

namespace uqtab {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // ln(2 pi) / 2

void check_prior(const BbbPrior& prior) {
  if (!(prior.sigma1 > 0.0 && prior.sigma2 > 0.0)) {
    throw std::runtime_error("bbb: prior sigmas must be > 0");
  }
  if (!(prior.pi > 0.0 && prior.pi <= 1.0)) {
    throw std::runtime_error("bbb: prior pi must lie in (0, 1]");
  }
}

// log N(w; 0, sigma^2)
double log_normal0(double w, double sigma) {
  return -kHalfLog2Pi - std::log(sigma) - w * w / (2.0 * sigma * sigma);
}

// Accumulates the KL part for one tensor. Every span has the tensor's size;
// g_mu/g_rho receive the *total* derivative given the data-term gradient
// g_w already stored in them (they arrive holding g_w and leave holding the
// combined gradient).
double kl_accumulate(const BbbPrior& prior, double kl_scale,
                     std::span<const double> mu, std::span<const double> rho,
                     std::span<const double> eps, std::span<double> g_mu,
                     std::span<double> g_rho) {
  const double log_pi1 = std::log(prior.pi);
  const double log_pi2 =
      prior.pi < 1.0 ? std::log(1.0 - prior.pi) : -std::numeric_limits<double>::infinity();
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double sigma = softplus(rho[i]);
    const double dsigma = sigmoid(rho[i]);  // d softplus / d rho
    const double w = mu[i] + sigma * eps[i];

    // log q(w | mu, rho) with w - mu = sigma eps: the mu dependence cancels
    // exactly, which is why no g_mu term appears for it below.
    const double log_q = -kHalfLog2Pi - std::log(sigma) - 0.5 * eps[i] * eps[i];

    const double comp1 = log_pi1 + log_normal0(w, prior.sigma1);
    const double comp2 = log_pi2 + log_normal0(w, prior.sigma2);
    const double log_p = logsumexp2(comp1, comp2);
    if (!std::isfinite(log_p)) {
      throw std::runtime_error("bbb: non-finite mixture prior log density");
    }
    // d log p / d w via mixture responsibilities.
    const double r1 = std::exp(comp1 - log_p);
    const double r2 = 1.0 - r1;
    const double dlogp_dw = -w * (r1 / (prior.sigma1 * prior.sigma1) +
                                  r2 / (prior.sigma2 * prior.sigma2));

    kl += log_q - log_p;
    g_mu[i] += kl_scale * (-dlogp_dw);
    g_rho[i] = g_rho[i] * eps[i] * dsigma +
               kl_scale * (-dsigma / sigma - dlogp_dw * eps[i] * dsigma);
  }
  return kl;
}

double eval_mean_bce(const BbbParams& params, const Matrix& x,
                     const std::vector<int>& y) {
  const MlpParams net = bbb_mean_weights(params);
  const std::vector<double> logits = mlp_logits(net, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    sum += bce_from_logit(logits[i], static_cast<double>(y[i]));
  }
  return sum / static_cast<double>(logits.size());
}

}  // namespace

BbbParams init_bbb(const MlpArchitecture& arch, const BbbPrior& prior,
                   double mu_init, double rho_init, RngStream& rng) {
  check_prior(prior);
  // Borrow the plain-MLP initializer for the shapes only.
  RngStream shape_rng = rng.child("bbb/shapes", 0);
  const MlpParams shape = init_mlp(arch, shape_rng);

  BbbParams p;
  p.arch = arch;
  p.prior = prior;
  for (std::size_t l = 0; l < shape.weights.size(); ++l) {
    Matrix mu(shape.weights[l].rows(), shape.weights[l].cols());
    for (double& v : mu.storage()) v = rng.normal(mu_init, 0.1);
    std::vector<double> mu_b(shape.biases[l].size());
    for (double& v : mu_b) v = rng.normal(mu_init, 0.1);
    Matrix rho(shape.weights[l].rows(), shape.weights[l].cols());
    for (double& v : rho.storage()) v = rng.normal(rho_init, 0.1);
    std::vector<double> rho_b(shape.biases[l].size());
    for (double& v : rho_b) v = rng.normal(rho_init, 0.1);
    p.mu_w.push_back(std::move(mu));
    p.mu_b.push_back(std::move(mu_b));
    p.rho_w.push_back(std::move(rho));
    p.rho_b.push_back(std::move(rho_b));
  }
  return p;
}

BbbGrad zero_grad_like(const BbbParams& params) {
  BbbGrad g;
  for (std::size_t l = 0; l < params.mu_w.size(); ++l) {
    g.mu_w.emplace_back(params.mu_w[l].rows(), params.mu_w[l].cols());
    g.rho_w.emplace_back(params.rho_w[l].rows(), params.rho_w[l].cols());
    g.mu_b.emplace_back(params.mu_b[l].size(), 0.0);
    g.rho_b.emplace_back(params.rho_b[l].size(), 0.0);
  }
  return g;
}

BbbNoise draw_bbb_noise(const BbbParams& params, RngStream& rng) {
  BbbNoise eps;
  for (std::size_t l = 0; l < params.mu_w.size(); ++l) {
    Matrix ew(params.mu_w[l].rows(), params.mu_w[l].cols());
    for (double& v : ew.storage()) v = rng.normal();
    eps.eps_w.push_back(std::move(ew));
    std::vector<double> eb(params.mu_b[l].size());
    for (double& v : eb) v = rng.normal();
    eps.eps_b.push_back(std::move(eb));
  }
  return eps;
}

MlpParams bbb_sample_weights(const BbbParams& params, const BbbNoise& eps) {
  MlpParams net;
  net.arch = params.arch;
  for (std::size_t l = 0; l < params.mu_w.size(); ++l) {
    Matrix w = params.mu_w[l];
    for (std::size_t i = 0; i < w.storage().size(); ++i) {
      w.storage()[i] += softplus(params.rho_w[l].storage()[i]) *
                        eps.eps_w[l].storage()[i];
    }
    net.weights.push_back(std::move(w));
    std::vector<double> b = params.mu_b[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] += softplus(params.rho_b[l][i]) * eps.eps_b[l][i];
    }
    net.biases.push_back(std::move(b));
  }
  return net;
}

MlpParams bbb_mean_weights(const BbbParams& params) {
  MlpParams net;
  net.arch = params.arch;
  net.weights = params.mu_w;
  net.biases = params.mu_b;
  return net;
}

double bbb_loss(const BbbParams& params, const Matrix& x, const std::vector<int>& y,
                int n_batches, const BbbNoise& eps,
                const std::vector<Matrix>* masks, BbbGrad* grad) {
  if (n_batches < 1) throw std::runtime_error("bbb: n_batches must be >= 1");
  check_prior(params.prior);
  const double kl_scale = 1.0 / n_batches;

  const MlpParams net = bbb_sample_weights(params, eps);
  MlpGrad net_grad = uqtab::zero_grad_like(net);
  const double data_loss = mlp_loss_grad(net, x, y, masks, &net_grad);
  if (!grad) {
    // Loss only: still needs the KL value.
    BbbGrad scratch = uqtab::zero_grad_like(params);
    double kl = 0.0;
    for (std::size_t l = 0; l < params.mu_w.size(); ++l) {
      kl += kl_accumulate(params.prior, kl_scale, params.mu_w[l].storage(),
                          params.rho_w[l].storage(), eps.eps_w[l].storage(),
                          scratch.mu_w[l].storage(), scratch.rho_w[l].storage());
      kl += kl_accumulate(params.prior, kl_scale, params.mu_b[l],
                          params.rho_b[l], eps.eps_b[l], scratch.mu_b[l],
                          scratch.rho_b[l]);
    }
    return kl_scale * kl + data_loss;
  }

  // Seed the BBB gradients with the data-term weight gradients g_w: the mu
  // path inherits g_w unchanged, the rho path needs g_w * eps * softplus'
  // which kl_accumulate applies (it receives g_w in g_rho and rescales it).
  double kl = 0.0;
  for (std::size_t l = 0; l < params.mu_w.size(); ++l) {
    grad->mu_w[l] = net_grad.weights[l];
    grad->rho_w[l] = net_grad.weights[l];
    grad->mu_b[l] = net_grad.biases[l];
    grad->rho_b[l] = net_grad.biases[l];
    kl += kl_accumulate(params.prior, kl_scale, params.mu_w[l].storage(),
                        params.rho_w[l].storage(), eps.eps_w[l].storage(),
                        grad->mu_w[l].storage(), grad->rho_w[l].storage());
    kl += kl_accumulate(params.prior, kl_scale, params.mu_b[l], params.rho_b[l],
                        eps.eps_b[l], grad->mu_b[l], grad->rho_b[l]);
  }
  return kl_scale * kl + data_loss;
}

BbbTrainResult train_bbb(const TrainConfig& config, const MlpArchitecture& arch,
                         const BbbPrior& prior, double mu_init, double rho_init,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng) {
  if (config.max_epochs < 1) throw std::runtime_error("max_epochs must be >= 1");
  if (config.patience < 1 || config.patience > config.max_epochs) {
    throw std::runtime_error("need 1 <= patience <= max_epochs");
  }
  if (x_train.rows() < 1 || x_val.rows() < 1) {
    throw std::runtime_error("train and validation sets must be non-empty");
  }

  BbbParams params = init_bbb(arch, prior, mu_init, rho_init, rng);
  AdamOptimizer adam(config.learning_rate);
  BbbGrad grad = zero_grad_like(params);

  const int n = x_train.rows();
  const int n_batches = (n + config.batch_size - 1) / config.batch_size;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  BbbTrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  auto params_spans = [&]() {
    auto spans = param_spans(params.mu_w, params.mu_b);
    auto rho = param_spans(params.rho_w, params.rho_b);
    spans.insert(spans.end(), rho.begin(), rho.end());
    return spans;
  };
  auto grad_spans = [&]() {
    auto spans = param_spans(std::as_const(grad.mu_w), std::as_const(grad.mu_b));
    auto rho = param_spans(std::as_const(grad.rho_w), std::as_const(grad.rho_b));
    spans.insert(spans.end(), rho.begin(), rho.end());
    return spans;
  };

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j =
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < n; start += config.batch_size) {
      const int bs = std::min(config.batch_size, n - start);
      Matrix bx(bs, x_train.cols());
      std::vector<int> by(bs);
      for (int i = 0; i < bs; ++i) {
        const int src = order[start + i];
        std::copy(x_train.row(src), x_train.row(src) + x_train.cols(), bx.row(i));
        by[i] = y_train[src];
      }
      std::vector<Matrix> masks;
      const std::vector<Matrix>* masks_ptr = nullptr;
      if (arch.dropout_rate > 0.0) {
        masks = draw_dropout_masks(arch, bs, rng);
        masks_ptr = &masks;
      }
      const BbbNoise eps = draw_bbb_noise(params, rng);
      const double loss = bbb_loss(params, bx, by, n_batches, eps, masks_ptr, &grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch));
      }
      adam.step(params_spans(), grad_spans());
    }

    EpochStats stats;
    stats.train_loss = eval_mean_bce(params, x_train, y_train);
    stats.val_loss = eval_mean_bce(params, x_val, y_val);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw std::runtime_error("non-finite training loss at epoch " +
                               std::to_string(epoch));
    }
    result.trace.epochs.push_back(stats);
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.params = params;
      result.trace.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }
  return result;
}

Matrix bbb_sample_predictions(const BbbParams& params, const Matrix& x, int k,
                              RngStream& rng) {
  if (k < 1) throw std::runtime_error("need at least one posterior sample");
  Matrix out(k, x.rows());
  for (int s = 0; s < k; ++s) {
    const BbbNoise eps = draw_bbb_noise(params, rng);
    const MlpParams net = bbb_sample_weights(params, eps);
    const std::vector<double> p = predict_proba(net, x);
    std::copy(p.begin(), p.end(), out.row(s));
  }
  return out;
}

}  // namespace uqtab
