#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uqtab/matrix.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

struct MlpArchitecture {
  int input_dim = 0;
  std::vector<int> hidden_sizes;
  double dropout_rate = 0.0;  // applied after each hidden ReLU while training
};

// Feed-forward binary classifier: ReLU hidden layers, one output logit.
// Weight matrix l is (fan_in x fan_out); biases start at zero.
struct MlpParams {
  MlpArchitecture arch;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

// Same tensor shapes as MlpParams, used for gradients.
struct MlpGrad {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 10;
  int patience = 3;  // stop when val loss fails to improve this many epochs
  int batch_size = 256;
  std::uint64_t seed = 0;  // callers derive the training RngStream from this
};

struct EpochStats {
  double train_loss = 0.0;  // deterministic pass, plus anchor penalty if any
  double val_loss = 0.0;    // deterministic pass, data term only
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based epoch whose parameters were returned
};

// Frozen anchor parameters for anchored-ensemble training. Each parameter
// group g contributes (1 / (2 lambda_g^2 n_train)) * ||theta_g - anchor_g||^2
// to the loss; lambda = sqrt(2/k) where k is the row count of the group
// treated as a matrix (weight matrices: fan_in; bias rows: 1).
struct AnchorSet {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> weight_lambda;
  double bias_lambda = 0.0;
  int n_train = 0;
};

// Flat mutable/const views over every tensor, layer order, weights then bias.
std::vector<std::span<double>> param_spans(std::vector<Matrix>& weights,
                                           std::vector<std::vector<double>>& biases);
std::vector<std::span<const double>> param_spans(
    const std::vector<Matrix>& weights,
    const std::vector<std::vector<double>>& biases);

// Adam with the usual bias-corrected moment estimates
// (beta1=0.9, beta2=0.999, eps=1e-8). State is lazily sized on first step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

 private:
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

// Weights ~ U(-sqrt(2/fan_in), sqrt(2/fan_in)), biases 0.
MlpParams init_mlp(const MlpArchitecture& arch, RngStream& rng);

MlpGrad zero_grad_like(const MlpParams& params);

// One inverted-dropout mask per hidden layer: entries are 0 or 1/keep_rate.
std::vector<Matrix> draw_dropout_masks(const MlpArchitecture& arch, int n_rows,
                                       RngStream& rng);

// Forward pass to the output logits. masks == nullptr is the deterministic
// inference path (dropout off).
std::vector<double> mlp_logits(const MlpParams& params, const Matrix& x,
                               const std::vector<Matrix>* masks = nullptr);

// sigmoid(logits); deterministic, entries in the open interval (0, 1).
std::vector<double> predict_proba(const MlpParams& params, const Matrix& x);

// Mean binary cross-entropy over the batch (logit-space evaluation). When
// grad is non-null it receives the full analytic gradient; when masks are
// given the same masks apply to forward and backward.
double mlp_loss_grad(const MlpParams& params, const Matrix& x,
                     const std::vector<int>& y,
                     const std::vector<Matrix>* masks, MlpGrad* grad);

// Anchor support: anchors drawn once from N(0, lambda^2) per group.
AnchorSet draw_anchors(const MlpArchitecture& arch, int n_train, RngStream& rng);
double anchored_penalty(const MlpParams& params, const AnchorSet& anchors);
void add_anchored_penalty_grad(const MlpParams& params, const AnchorSet& anchors,
                               MlpGrad* grad);

struct MlpTrainResult {
  MlpParams params;
  TrainingTrace trace;
};

// Adam + minibatches + early stopping: stops once validation loss has not
// improved for `patience` consecutive epochs and returns the parameters of
// the best validation epoch. Anchored training adds the anchor penalty to
// the optimized objective (train side only).
MlpTrainResult train_mlp(const TrainConfig& config, const MlpArchitecture& arch,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng, const AnchorSet* anchors = nullptr);

// K stochastic forward passes with dropout kept on; row k holds the k-th
// pass's positive-class probabilities.
Matrix mc_dropout_predictions(const MlpParams& params, const Matrix& x, int k,
                              RngStream& rng);

}  // namespace uqtab
