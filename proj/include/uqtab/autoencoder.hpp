#pragma once

#include <span>
#include <vector>

#include "uqtab/matrix.hpp"
#include "uqtab/mlp.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

// Symmetric bottleneck network D -> hidden... -> latent -> hidden... -> D.
// Encoder/decoder hidden layers are ReLU; the latent code and the output
// are linear (so an identity-weight model reconstructs any input exactly).
struct AutoencoderModel {
  int input_dim = 0;
  std::vector<int> hidden_sizes;  // encoder side; the decoder mirrors it
  int latent_dim = 0;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

AutoencoderModel init_autoencoder(int input_dim, const std::vector<int>& hidden_sizes,
                                  int latent_dim, RngStream& rng);

// Full forward pass: reconstructions, one row per input row.
Matrix ae_reconstruct(const AutoencoderModel& model, const Matrix& x);

// Mean over D of the squared reconstruction gap for one row.
double reconstruction_error(const AutoencoderModel& model, std::span<const double> x);
// Per-row errors, parallel over rows.
std::vector<double> reconstruction_errors(const AutoencoderModel& model,
                                          const Matrix& x);

// Training loss: mean squared error over every cell of the batch. Fills
// analytic gradients when grad != null.
double ae_loss_grad(const AutoencoderModel& model, const Matrix& x, MlpGrad* grad);

struct AeTrainResult {
  AutoencoderModel model;
  TrainingTrace trace;
};

// Same Adam/minibatch/early-stopping contract as train_mlp, with the
// reconstruction MSE as both training objective and validation criterion.
AeTrainResult train_autoencoder(const TrainConfig& config, int input_dim,
                                const std::vector<int>& hidden_sizes,
                                int latent_dim, const Matrix& x_train,
                                const Matrix& x_val, RngStream& rng);

}  // namespace uqtab
