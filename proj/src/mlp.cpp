#include "uqtab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "uqtab/kernels.hpp"
#include "uqtab/numerics.hpp"

namespace uqtab {
namespace {

void check_arch(const MlpArchitecture& arch) {
  if (arch.input_dim < 1) throw std::runtime_error("mlp: input_dim must be >= 1");
  for (int h : arch.hidden_sizes) {
    if (h < 1) throw std::runtime_error("mlp: hidden sizes must be >= 1");
  }
  if (!(arch.dropout_rate >= 0.0 && arch.dropout_rate <= 0.5)) {
    throw std::runtime_error("mlp: dropout_rate must lie in [0, 0.5]");
  }
}

std::vector<int> layer_dims(const MlpArchitecture& arch) {
  std::vector<int> dims;
  dims.reserve(arch.hidden_sizes.size() + 2);
  dims.push_back(arch.input_dim);
  for (int h : arch.hidden_sizes) dims.push_back(h);
  dims.push_back(1);
  return dims;
}

// out (n x fan_out) = a . w + bias, row-wise.
void affine(const Matrix& a, const Matrix& w, const std::vector<double>& b,
            Matrix* out) {
  *out = Matrix(a.rows(), w.cols());
  kernels::matmul(a.data(), w.data(), out->data(), a.rows(), a.cols(), w.cols());
  kernels::parallel_for(a.rows(), [&](int i) {
    double* row = out->row(i);
    for (int j = 0; j < w.cols(); ++j) row[j] += b[j];
  });
}

void check_labels(const std::vector<int>& y) {
  for (int v : y) {
    if (v != 0 && v != 1) throw std::runtime_error("labels must be 0 or 1");
  }
}

// Mean BCE of the deterministic forward pass; no gradients.
double eval_bce(const MlpParams& params, const Matrix& x, const std::vector<int>& y) {
  const std::vector<double> logits = mlp_logits(params, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    sum += bce_from_logit(logits[i], static_cast<double>(y[i]));
  }
  return sum / static_cast<double>(logits.size());
}

}  // namespace

std::vector<std::span<double>> param_spans(std::vector<Matrix>& weights,
                                           std::vector<std::vector<double>>& biases) {
  std::vector<std::span<double>> spans;
  spans.reserve(2 * weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    spans.emplace_back(weights[l].storage());
    spans.emplace_back(biases[l]);
  }
  return spans;
}

std::vector<std::span<const double>> param_spans(
    const std::vector<Matrix>& weights,
    const std::vector<std::vector<double>>& biases) {
  std::vector<std::span<const double>> spans;
  spans.reserve(2 * weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    spans.emplace_back(weights[l].storage());
    spans.emplace_back(biases[l]);
  }
  return spans;
}

void AdamOptimizer::step(const std::vector<std::span<double>>& params,
                         const std::vector<std::span<const double>>& grads) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (m_.empty()) {
    std::size_t total = 0;
    for (const auto& s : params) total += s.size();
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }
  ++t_;
  const double corr1 = 1.0 - std::pow(kBeta1, t_);
  const double corr2 = 1.0 - std::pow(kBeta2, t_);
  std::size_t off = 0;
  for (std::size_t s = 0; s < params.size(); ++s) {
    std::span<double> p = params[s];
    std::span<const double> g = grads[s];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[off] = kBeta1 * m_[off] + (1.0 - kBeta1) * g[i];
      v_[off] = kBeta2 * v_[off] + (1.0 - kBeta2) * g[i] * g[i];
      const double mhat = m_[off] / corr1;
      const double vhat = v_[off] / corr2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      ++off;
    }
  }
}

MlpParams init_mlp(const MlpArchitecture& arch, RngStream& rng) {
  check_arch(arch);
  const std::vector<int> dims = layer_dims(arch);
  MlpParams p;
  p.arch = arch;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    Matrix w(fan_in, fan_out);
    const double scale = std::sqrt(2.0 / fan_in);
    for (double& x : w.storage()) x = rng.uniform(-scale, scale);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

MlpGrad zero_grad_like(const MlpParams& params) {
  MlpGrad g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

std::vector<Matrix> draw_dropout_masks(const MlpArchitecture& arch, int n_rows,
                                       RngStream& rng) {
  const double keep = 1.0 - arch.dropout_rate;
  std::vector<Matrix> masks;
  masks.reserve(arch.hidden_sizes.size());
  for (int h : arch.hidden_sizes) {
    Matrix m(n_rows, h);
    for (double& x : m.storage()) {
      x = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

std::vector<double> mlp_logits(const MlpParams& params, const Matrix& x,
                               const std::vector<Matrix>* masks) {
  if (x.cols() != params.arch.input_dim) {
    throw std::runtime_error("mlp: feature dimension does not match the model");
  }
  const std::size_t n_layers = params.weights.size();
  Matrix held;  // owns the current activation after the first layer
  const Matrix* cur = &x;
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Matrix z;
    affine(*cur, params.weights[l], params.biases[l], &z);
    const Matrix* mask = masks ? &(*masks)[l] : nullptr;
    kernels::parallel_for(z.rows(), [&](int i) {
      double* row = z.row(i);
      for (int j = 0; j < z.cols(); ++j) {
        row[j] = row[j] > 0.0 ? row[j] : 0.0;
        if (mask) row[j] *= (*mask)(i, j);
      }
    });
    held = std::move(z);
    cur = &held;
  }
  Matrix out;
  affine(*cur, params.weights[n_layers - 1], params.biases[n_layers - 1], &out);
  std::vector<double> logits(out.rows());
  for (int i = 0; i < out.rows(); ++i) logits[i] = out(i, 0);
  return logits;
}

std::vector<double> predict_proba(const MlpParams& params, const Matrix& x) {
  std::vector<double> p = mlp_logits(params, x);
  for (double& v : p) v = sigmoid(v);
  return p;
}

double mlp_loss_grad(const MlpParams& params, const Matrix& x,
                     const std::vector<int>& y,
                     const std::vector<Matrix>* masks, MlpGrad* grad) {
  if (x.cols() != params.arch.input_dim) {
    throw std::runtime_error("mlp: feature dimension does not match the model");
  }
  if (static_cast<int>(y.size()) != x.rows()) {
    throw std::runtime_error("mlp: row/label count mismatch");
  }
  const int n = x.rows();
  const std::size_t n_layers = params.weights.size();
  const std::size_t n_hidden = n_layers - 1;

  // Forward, caching pre-activations and post-ReLU(+mask) activations.
  std::vector<Matrix> z(n_hidden);  // pre-activation per hidden layer
  std::vector<Matrix> a(n_hidden);  // activation fed to the next layer
  const Matrix* cur = &x;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    affine(*cur, params.weights[l], params.biases[l], &z[l]);
    a[l] = z[l];
    const Matrix* mask = masks ? &(*masks)[l] : nullptr;
    kernels::parallel_for(a[l].rows(), [&](int i) {
      double* row = a[l].row(i);
      for (int j = 0; j < a[l].cols(); ++j) {
        row[j] = row[j] > 0.0 ? row[j] : 0.0;
        if (mask) row[j] *= (*mask)(i, j);
      }
    });
    cur = &a[l];
  }
  Matrix out;
  affine(*cur, params.weights[n_layers - 1], params.biases[n_layers - 1], &out);

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss += bce_from_logit(out(i, 0), static_cast<double>(y[i]));
  }
  loss /= n;
  if (!grad) return loss;

  // d loss / d logit_i = (sigmoid(logit_i) - y_i) / n
  Matrix delta(n, 1);
  kernels::parallel_for(n, [&](int i) {
    delta(i, 0) = (sigmoid(out(i, 0)) - static_cast<double>(y[i])) / n;
  });

  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& input = l == 0 ? x : a[l - 1];
    Matrix& gw = grad->weights[l];
    kernels::matmul_tn(input.data(), delta.data(), gw.data(), input.cols(),
                       input.rows(), delta.cols());
    std::vector<double>& gb = grad->biases[l];
    kernels::parallel_for(delta.cols(), [&](int j) {
      double s = 0.0;
      for (int i = 0; i < delta.rows(); ++i) s += delta(i, j);
      gb[j] = s;
    });
    if (l == 0) break;
    Matrix prev_delta(n, params.weights[l].rows());
    kernels::matmul_nt(delta.data(), params.weights[l].data(), prev_delta.data(),
                       n, delta.cols(), params.weights[l].rows());
    // Through the dropout mask and the ReLU gate of hidden layer l-1.
    const Matrix* mask = masks ? &(*masks)[l - 1] : nullptr;
    kernels::parallel_for(n, [&](int i) {
      double* row = prev_delta.row(i);
      for (int j = 0; j < prev_delta.cols(); ++j) {
        if (mask) row[j] *= (*mask)(i, j);
        if (z[l - 1](i, j) <= 0.0) row[j] = 0.0;
      }
    });
    delta = std::move(prev_delta);
  }
  return loss;
}

AnchorSet draw_anchors(const MlpArchitecture& arch, int n_train, RngStream& rng) {
  check_arch(arch);
  if (n_train < 1) throw std::runtime_error("anchors: n_train must be >= 1");
  const std::vector<int> dims = layer_dims(arch);
  AnchorSet anchors;
  anchors.n_train = n_train;
  anchors.bias_lambda = std::sqrt(2.0);  // bias rows form a 1 x fan_out group
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double lambda = std::sqrt(2.0 / fan_in);
    anchors.weight_lambda.push_back(lambda);
    Matrix w(fan_in, fan_out);
    for (double& x : w.storage()) x = rng.normal(0.0, lambda);
    anchors.weights.push_back(std::move(w));
    std::vector<double> b(fan_out);
    for (double& x : b) x = rng.normal(0.0, anchors.bias_lambda);
    anchors.biases.push_back(std::move(b));
  }
  return anchors;
}

double anchored_penalty(const MlpParams& params, const AnchorSet& anchors) {
  double total = 0.0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const double lw = anchors.weight_lambda[l];
    double ss = 0.0;
    const auto& w = params.weights[l].storage();
    const auto& aw = anchors.weights[l].storage();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - aw[i];
      ss += d * d;
    }
    total += ss / (2.0 * lw * lw * anchors.n_train);
    double ssb = 0.0;
    for (std::size_t i = 0; i < params.biases[l].size(); ++i) {
      const double d = params.biases[l][i] - anchors.biases[l][i];
      ssb += d * d;
    }
    total += ssb / (2.0 * anchors.bias_lambda * anchors.bias_lambda * anchors.n_train);
  }
  return total;
}

void add_anchored_penalty_grad(const MlpParams& params, const AnchorSet& anchors,
                               MlpGrad* grad) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const double cw = 1.0 / (anchors.weight_lambda[l] * anchors.weight_lambda[l] *
                             anchors.n_train);
    auto& gw = grad->weights[l].storage();
    const auto& w = params.weights[l].storage();
    const auto& aw = anchors.weights[l].storage();
    for (std::size_t i = 0; i < w.size(); ++i) gw[i] += cw * (w[i] - aw[i]);
    const double cb =
        1.0 / (anchors.bias_lambda * anchors.bias_lambda * anchors.n_train);
    for (std::size_t i = 0; i < params.biases[l].size(); ++i) {
      grad->biases[l][i] += cb * (params.biases[l][i] - anchors.biases[l][i]);
    }
  }
}

MlpTrainResult train_mlp(const TrainConfig& config, const MlpArchitecture& arch,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng, const AnchorSet* anchors) {
  if (config.learning_rate < 0.0) throw std::runtime_error("learning_rate must be >= 0");
  if (config.max_epochs < 1) throw std::runtime_error("max_epochs must be >= 1");
  if (config.patience < 1 || config.patience > config.max_epochs) {
    throw std::runtime_error("need 1 <= patience <= max_epochs");
  }
  if (config.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (x_train.rows() < 1 || x_val.rows() < 1) {
    throw std::runtime_error("train and validation sets must be non-empty");
  }
  check_labels(y_train);
  check_labels(y_val);

  MlpParams params = init_mlp(arch, rng);
  AdamOptimizer adam(config.learning_rate);
  MlpGrad grad = zero_grad_like(params);

  const int n = x_train.rows();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  MlpTrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

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
      double loss = mlp_loss_grad(params, bx, by, masks_ptr, &grad);
      if (anchors) {
        loss += anchored_penalty(params, *anchors);
        add_anchored_penalty_grad(params, *anchors, &grad);
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch));
      }
      adam.step(param_spans(params.weights, params.biases),
                param_spans(std::as_const(grad.weights), std::as_const(grad.biases)));
    }

    EpochStats stats;
    stats.train_loss = eval_bce(params, x_train, y_train);
    if (anchors) stats.train_loss += anchored_penalty(params, *anchors);
    stats.val_loss = eval_bce(params, x_val, y_val);
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

Matrix mc_dropout_predictions(const MlpParams& params, const Matrix& x, int k,
                              RngStream& rng) {
  if (k < 1) throw std::runtime_error("need at least one stochastic pass");
  Matrix out(k, x.rows());
  for (int pass = 0; pass < k; ++pass) {
    std::vector<Matrix> masks = draw_dropout_masks(params.arch, x.rows(), rng);
    const std::vector<double> logits = mlp_logits(params, x, &masks);
    double* row = out.row(pass);
    for (int i = 0; i < x.rows(); ++i) row[i] = sigmoid(logits[i]);
  }
  return out;
}

}  // namespace uqtab
