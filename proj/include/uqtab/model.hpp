#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "uqtab/autoencoder.hpp"
#include "uqtab/bbb.hpp"
#include "uqtab/ensemble.hpp"
#include "uqtab/features.hpp"
#include "uqtab/logreg.hpp"
#include "uqtab/matrix.hpp"
#include "uqtab/metrics.hpp"
#include "uqtab/mlp.hpp"
#include "uqtab/ppca.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

// A single feed-forward classifier scored by its point prediction.
struct NnModel {
  MlpParams net;
};

// A feed-forward classifier whose logits are rescaled by a temperature
// fitted on the validation set.
struct PlattScalingModel {
  MlpParams net;
  double temperature = 1.0;
};

// A dropout-trained classifier that keeps dropout active at prediction
// time and scores by the spread of stochastic forward passes.
struct McDropoutModel {
  MlpParams net;
};

// Mean-field Gaussian posterior over the network weights.
struct BbbModel {
  BbbParams params;
};

using ModelVariant = std::variant<NnModel, PlattScalingModel, LogRegModel,
                                  McDropoutModel, BbbModel, EnsembleModel,
                                  PpcaModel, AutoencoderModel>;

// One trained entry of the model zoo, tagged with its registry name.
struct TrainedModel {
  std::string name;
  ModelVariant model;
};

// Flat hyperparameter bundle covering every model family.  Each registry
// entry only reads the fields that apply to it.
struct Hyperparams {
  std::vector<int> hidden_sizes;
  double dropout_rate = 0.0;
  double learning_rate = 1e-3;

  // Weight-posterior settings (BBB only).
  double mu_init = 0.0;
  double rho_init = -6.0;
  double prior_pi = 0.5;
  double prior_sigma1 = 1.0;
  double prior_sigma2 = 1.0;

  // Logistic regression inverse regularisation strength.
  double inverse_l2 = 10.0;

  // Density-model dimensions.
  int latent_dim = 15;
  int n_components = 15;

  // Ensemble members / stochastic forward passes per prediction.
  int n_samples = 10;

  int max_epochs = 10;
  int patience = 3;
  int batch_size = 256;
};

// Stable flat JSON encoding of a hyperparameter bundle; round-trips exactly.
nlohmann::ordered_json hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::ordered_json& j);

// Registry entry: canonical name, default hyperparameters and the
// uncertainty metrics the model supports.
struct ModelSpec {
  std::string name;
  Hyperparams defaults;
  std::vector<std::string> metrics;
  bool is_classifier = true;
};

// Full roster in canonical order.  Classifiers first (alphabetical), then
// the density models.
const std::vector<ModelSpec>& model_registry();

// Lookup by name; throws std::invalid_argument for unknown names.
const ModelSpec& find_model_spec(const std::string& name);

// Trains one registry model on scaled features.  All randomness is drawn
// from `rng`; deterministic models ignore it.
TrainedModel train_model(const ModelSpec& spec, const Hyperparams& hp,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_val, const std::vector<int>& y_val,
                         RngStream& rng);

// Point predictions of the positive-class probability (classifiers only;
// throws for density models).  Stochastic families report their
// deterministic forward pass / posterior mean / member average.
std::vector<double> predict_mean_proba(const TrainedModel& model,
                                       const Matrix& x);

// Stacks stochastic predictions into a (k x n_rows) matrix.  Deterministic
// classifiers return a single row regardless of `k`; ensembles require `k`
// to match their member count.  Density models throw.
PredictionEnsemble sample_predictions(const TrainedModel& model,
                                      const Matrix& x, int k, RngStream& rng);

// Computes every registry metric of the model on `x`.  For density models
// this is the novelty score; classifiers derive their metrics from
// sample_predictions with `k` draws.
std::vector<UncertaintyScores> compute_model_scores(const TrainedModel& model,
                                                    const Matrix& x, int k,
                                                    RngStream& rng);

// Binary model container: magic + JSON header + little-endian f64 blocks.
// The scaler travels with the model so saved models can be applied to raw
// feature rows.  Round-trips are bit-exact.
void save_model(const TrainedModel& model, const Hyperparams& hp,
                const ScalerStats* scaler, std::uint64_t master_seed,
                const std::string& path);

struct LoadedModel {
  TrainedModel model;
  Hyperparams hyperparams;
  ScalerStats scaler;
  bool has_scaler = false;
  std::uint64_t master_seed = 0;
};

LoadedModel load_model(const std::string& path);

}  // namespace uqtab
