#include "uqtab/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "uqtab/kernels.hpp"

namespace uqtab {
namespace {

// Layer size chain D -> hidden... -> latent -> reversed hidden... -> D.
std::vector<int> layer_dims(const AutoencoderModel& model) {
  std::vector<int> dims;
  dims.push_back(model.input_dim);
  for (int h : model.hidden_sizes) dims.push_back(h);
  dims.push_back(model.latent_dim);
  for (auto it = model.hidden_sizes.rbegin(); it != model.hidden_sizes.rend(); ++it) {
    dims.push_back(*it);
  }
  dims.push_back(model.input_dim);
  return dims;
}

// ReLU applies after layer l iff its output is an encoder or decoder hidden
// stack entry — not the latent code (index H+1) and not the output.
std::vector<bool> relu_flags(const AutoencoderModel& model) {
  const int h = static_cast<int>(model.hidden_sizes.size());
  const int n_layers = 2 * h + 2;
  std::vector<bool> relu(n_layers, true);
  relu[h] = false;             // layer producing the latent code
  relu[n_layers - 1] = false;  // output layer
  return relu;
}

void affine(const Matrix& a, const Matrix& w, const std::vector<double>& b,
            Matrix* out) {
  *out = Matrix(a.rows(), w.cols());
  kernels::matmul(a.data(), w.data(), out->data(), a.rows(), a.cols(), w.cols());
  kernels::parallel_for(a.rows(), [&](int i) {
    double* row = out->row(i);
    for (int j = 0; j < w.cols(); ++j) row[j] += b[j];
  });
}

void check_model(const AutoencoderModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim) {
    throw std::runtime_error("autoencoder: feature dimension does not match");
  }
}

double eval_mse(const AutoencoderModel& model, const Matrix& x) {
  const Matrix recon = ae_reconstruct(model, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < recon.storage().size(); ++i) {
    const double d = recon.storage()[i] - x.storage()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(recon.storage().size());
}

}  // namespace

AutoencoderModel init_autoencoder(int input_dim, const std::vector<int>& hidden_sizes,
                                  int latent_dim, RngStream& rng) {
  if (input_dim < 1 || latent_dim < 1) {
    throw std::runtime_error("autoencoder: dims must be >= 1");
  }
  for (int h : hidden_sizes) {
    if (h < 1) throw std::runtime_error("autoencoder: hidden sizes must be >= 1");
  }
  AutoencoderModel model;
  model.input_dim = input_dim;
  model.hidden_sizes = hidden_sizes;
  model.latent_dim = latent_dim;
  const std::vector<int> dims = layer_dims(model);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    Matrix w(fan_in, fan_out);
    const double scale = std::sqrt(2.0 / fan_in);
    for (double& v : w.storage()) v = rng.uniform(-scale, scale);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

Matrix ae_reconstruct(const AutoencoderModel& model, const Matrix& x) {
  check_model(model, x);
  const std::vector<bool> relu = relu_flags(model);
  Matrix held;
  const Matrix* cur = &x;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Matrix z;
    affine(*cur, model.weights[l], model.biases[l], &z);
    if (relu[l]) {
      kernels::parallel_for(z.rows(), [&](int i) {
        double* row = z.row(i);
        for (int j = 0; j < z.cols(); ++j) row[j] = row[j] > 0.0 ? row[j] : 0.0;
      });
    }
    held = std::move(z);
    cur = &held;
  }
  return held;
}

double reconstruction_error(const AutoencoderModel& model, std::span<const double> x) {
  Matrix one(1, model.input_dim);
  std::copy(x.begin(), x.end(), one.row(0));
  const Matrix recon = ae_reconstruct(model, one);
  double sum = 0.0;
  for (int j = 0; j < model.input_dim; ++j) {
    const double d = recon(0, j) - one(0, j);
    sum += d * d;
  }
  return sum / model.input_dim;
}

std::vector<double> reconstruction_errors(const AutoencoderModel& model,
                                          const Matrix& x) {
  check_model(model, x);
  const Matrix recon = ae_reconstruct(model, x);
  std::vector<double> out(x.rows());
  kernels::parallel_for(x.rows(), [&](int i) {
    const double* a = recon.row(i);
    const double* b = x.row(i);
    double sum = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      const double d = a[j] - b[j];
      sum += d * d;
    }
    out[i] = sum / x.cols();
  });
  return out;
}

double ae_loss_grad(const AutoencoderModel& model, const Matrix& x, MlpGrad* grad) {
  check_model(model, x);
  const int n = x.rows();
  const std::vector<bool> relu = relu_flags(model);
  const std::size_t n_layers = model.weights.size();

  // Forward with caches: z = pre-activation, a = post-activation.
  std::vector<Matrix> z(n_layers);
  std::vector<Matrix> a(n_layers);
  const Matrix* cur = &x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    affine(*cur, model.weights[l], model.biases[l], &z[l]);
    a[l] = z[l];
    if (relu[l]) {
      kernels::parallel_for(a[l].rows(), [&](int i) {
        double* row = a[l].row(i);
        for (int j = 0; j < a[l].cols(); ++j) row[j] = row[j] > 0.0 ? row[j] : 0.0;
      });
    }
    cur = &a[l];
  }
  const Matrix& recon = a[n_layers - 1];

  double loss = 0.0;
  for (std::size_t i = 0; i < recon.storage().size(); ++i) {
    const double d = recon.storage()[i] - x.storage()[i];
    loss += d * d;
  }
  const double n_cells = static_cast<double>(recon.storage().size());
  loss /= n_cells;
  if (!grad) return loss;

  Matrix delta(n, model.input_dim);
  kernels::parallel_for(n, [&](int i) {
    const double* r = recon.row(i);
    const double* t = x.row(i);
    double* d = delta.row(i);
    for (int j = 0; j < model.input_dim; ++j) {
      d[j] = 2.0 * (r[j] - t[j]) / n_cells;
    }
  });

  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& input = l == 0 ? x : a[l - 1];
    kernels::matmul_tn(input.data(), delta.data(), grad->weights[l].data(),
                       input.cols(), input.rows(), delta.cols());
    std::vector<double>& gb = grad->biases[l];
    kernels::parallel_for(delta.cols(), [&](int j) {
      double s = 0.0;
      for (int i = 0; i < delta.rows(); ++i) s += delta(i, j);
      gb[j] = s;
    });
    if (l == 0) break;
    Matrix prev_delta(n, model.weights[l].rows());
    kernels::matmul_nt(delta.data(), model.weights[l].data(), prev_delta.data(),
                       n, delta.cols(), model.weights[l].rows());
    if (relu[l - 1]) {
      kernels::parallel_for(n, [&](int i) {
        double* row = prev_delta.row(i);
        for (int j = 0; j < prev_delta.cols(); ++j) {
          if (z[l - 1](i, j) <= 0.0) row[j] = 0.0;
        }
      });
    }
    delta = std::move(prev_delta);
  }
  return loss;
}

AeTrainResult train_autoencoder(const TrainConfig& config, int input_dim,
                                const std::vector<int>& hidden_sizes,
                                int latent_dim, const Matrix& x_train,
                                const Matrix& x_val, RngStream& rng) {
  if (config.max_epochs < 1) throw std::runtime_error("max_epochs must be >= 1");
  if (config.patience < 1 || config.patience > config.max_epochs) {
    throw std::runtime_error("need 1 <= patience <= max_epochs");
  }
  if (x_train.rows() < 1 || x_val.rows() < 1) {
    throw std::runtime_error("train and validation sets must be non-empty");
  }

  AutoencoderModel model = init_autoencoder(input_dim, hidden_sizes, latent_dim, rng);
  AdamOptimizer adam(config.learning_rate);
  MlpGrad grad;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    grad.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    grad.biases.emplace_back(model.biases[l].size(), 0.0);
  }

  const int n = x_train.rows();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  AeTrainResult result;
  result.model = model;
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
      for (int i = 0; i < bs; ++i) {
        const int src = order[start + i];
        std::copy(x_train.row(src), x_train.row(src) + x_train.cols(), bx.row(i));
      }
      const double loss = ae_loss_grad(model, bx, &grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch));
      }
      adam.step(param_spans(model.weights, model.biases),
                param_spans(std::as_const(grad.weights), std::as_const(grad.biases)));
    }

    EpochStats stats;
    stats.train_loss = eval_mse(model, x_train);
    stats.val_loss = eval_mse(model, x_val);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw std::runtime_error("non-finite training loss at epoch " +
                               std::to_string(epoch));
    }
    result.trace.epochs.push_back(stats);
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.model = model;
      result.trace.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace uqtab
