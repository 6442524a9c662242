#pragma once

#include <vector>

#include "uqtab/matrix.hpp"
#include "uqtab/mlp.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

// Scale mixture prior over every weight: pi N(0, sigma1^2) + (1-pi) N(0, sigma2^2).
struct BbbPrior {
  double pi = 0.5;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
};

// Mean-field variational posterior: each weight w ~ N(mu, softplus(rho)^2).
struct BbbParams {
  MlpArchitecture arch;
  std::vector<Matrix> mu_w, rho_w;
  std::vector<std::vector<double>> mu_b, rho_b;
  BbbPrior prior;
};

struct BbbGrad {
  std::vector<Matrix> mu_w, rho_w;
  std::vector<std::vector<double>> mu_b, rho_b;
};

// One standard normal per weight, frozen for a reparameterized sample.
struct BbbNoise {
  std::vector<Matrix> eps_w;
  std::vector<std::vector<double>> eps_b;
};

// mu drawn from N(mu_init, 0.1), rho from N(rho_init, 0.1), per layer in
// order (mu_w, mu_b, rho_w, rho_b).
BbbParams init_bbb(const MlpArchitecture& arch, const BbbPrior& prior,
                   double mu_init, double rho_init, RngStream& rng);

BbbGrad zero_grad_like(const BbbParams& params);
BbbNoise draw_bbb_noise(const BbbParams& params, RngStream& rng);

// w = mu + softplus(rho) * eps, packaged as a plain network.
MlpParams bbb_sample_weights(const BbbParams& params, const BbbNoise& eps);
// Posterior means as a deterministic network (validation scoring).
MlpParams bbb_mean_weights(const BbbParams& params);

// Single-sample minibatch ELBO estimate:
//   loss = (1/n_batches) [log q(w|mu,rho) - log p(w)] + mean-BCE(batch)
// with w reparameterized through the frozen noise. Gradients are total
// derivatives through both the KL estimate and the network. masks apply
// dropout inside the data term (training path).
double bbb_loss(const BbbParams& params, const Matrix& x, const std::vector<int>& y,
                int n_batches, const BbbNoise& eps,
                const std::vector<Matrix>* masks, BbbGrad* grad);

struct BbbTrainResult {
  BbbParams params;
  TrainingTrace trace;  // deterministic posterior-mean BCE per epoch
};

// Same Adam/minibatch/early-stopping contract as train_mlp; the early-stop
// criterion is the validation BCE under the posterior-mean weights, so it
// is deterministic across runs of the same stream.
BbbTrainResult train_bbb(const TrainConfig& config, const MlpArchitecture& arch,
                         const BbbPrior& prior, double mu_init, double rho_init,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng);

// K predictions under K independent posterior weight draws (dropout off).
Matrix bbb_sample_predictions(const BbbParams& params, const Matrix& x, int k,
                              RngStream& rng);

}  // namespace uqtab
