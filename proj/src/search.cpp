#include "uqtab/search.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "uqtab/numerics.hpp"

namespace uqtab {

using nlohmann::ordered_json;

namespace {

const double kCGrid[] = {10.0, 100.0, 1000.0, 10000.0};
const int kLayerSizes[] = {25, 30, 50, 75, 100};
const int kLatentSizes[] = {5, 10, 15, 20};

// Hidden layers: 1-4 layers of one shared width from the size grid.
std::vector<int> sample_hidden_sizes(RngStream& rng) {
  const int n_layers = 1 + rng.uniform_int(4);
  const int size = kLayerSizes[rng.uniform_int(5)];
  return std::vector<int>(static_cast<std::size_t>(n_layers), size);
}

double sample_learning_rate(RngStream& rng) {
  return std::exp(rng.uniform(std::log(1e-4), std::log(0.1)));
}

double mean_val_bce(const std::vector<double>& logits,
                    const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += bce_from_logit(logits[i], labels[i]);
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace

bool is_searchable_model(const std::string& model_name) {
  return model_name == "LogReg" || model_name == "NN" ||
         model_name == "MCDropout" || model_name == "BBB" ||
         model_name == "AE";
}

int default_search_budget(const std::string& model_name) {
  if (model_name == "BBB") return 60;
  if (model_name == "LogReg") return 4;
  return 40;
}

Hyperparams sample_hyperparams(const std::string& model_name, int trial,
                               RngStream& rng) {
  Hyperparams hp = find_model_spec(model_name).defaults;
  if (model_name == "LogReg") {
    hp.inverse_l2 = kCGrid[trial % 4];
    return hp;
  }
  if (model_name == "NN" || model_name == "MCDropout") {
    hp.hidden_sizes = sample_hidden_sizes(rng);
    hp.dropout_rate = rng.uniform(0.0, 0.5);
    hp.learning_rate = sample_learning_rate(rng);
    return hp;
  }
  if (model_name == "AE") {
    hp.hidden_sizes = sample_hidden_sizes(rng);
    hp.latent_dim = kLatentSizes[rng.uniform_int(4)];
    hp.learning_rate = sample_learning_rate(rng);
    return hp;
  }
  if (model_name == "BBB") {
    hp.hidden_sizes = sample_hidden_sizes(rng);
    hp.dropout_rate = rng.uniform(0.0, 0.5);
    hp.learning_rate = sample_learning_rate(rng);
    hp.mu_init = rng.uniform(-0.6, 0.6);
    hp.rho_init = rng.uniform(-8.0, -2.0);
    hp.prior_pi = rng.uniform(0.1, 0.9);
    hp.prior_sigma1 = rng.uniform(std::exp(-0.8), std::exp(0.1));
    hp.prior_sigma2 = rng.uniform(std::exp(-0.8), std::exp(0.1));
    return hp;
  }
  throw std::invalid_argument("model " + model_name +
                              " has no search space; tune NN instead");
}

SearchResult random_search(const std::string& model_name, int budget,
                           const Matrix& x_train, const std::vector<int>& y_train,
                           const Matrix& x_val, const std::vector<int>& y_val,
                           std::uint64_t master_seed) {
  if (!is_searchable_model(model_name)) {
    throw std::invalid_argument("model " + model_name +
                                " has no search space; tune NN instead");
  }
  if (budget < 1) throw std::invalid_argument("search budget must be positive");

  const ModelSpec& spec = find_model_spec(model_name);
  SearchResult result;
  result.model = model_name;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  for (int trial = 0; trial < budget; ++trial) {
    RngStream sample_rng(master_seed, "tune/sample/" + model_name, trial);
    TrialRecord record;
    record.trial = trial;
    record.hyperparams = sample_hyperparams(model_name, trial, sample_rng);

    RngStream train_rng(master_seed, "tune/train/" + model_name, trial);
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    try {
      if (model_name == "LogReg") {
        const LogRegModel lr =
            train_logreg(x_train, y_train, record.hyperparams.inverse_l2);
        val_loss = mean_val_bce(logreg_logits(lr, x_val), y_val);
      } else if (model_name == "AE") {
        const AeTrainResult fit = train_autoencoder(
            {record.hyperparams.learning_rate, record.hyperparams.max_epochs,
             record.hyperparams.patience, record.hyperparams.batch_size},
            x_train.cols(), record.hyperparams.hidden_sizes,
            record.hyperparams.latent_dim, x_train, x_val, train_rng);
        val_loss = fit.trace.epochs[fit.trace.best_epoch].val_loss;
      } else {
        const TrainedModel model =
            train_model(spec, record.hyperparams, x_train, y_train, x_val,
                        y_val, train_rng);
        std::vector<double> logits;
        if (const auto* nn = std::get_if<NnModel>(&model.model)) {
          logits = mlp_logits(nn->net, x_val);
        } else if (const auto* mc = std::get_if<McDropoutModel>(&model.model)) {
          logits = mlp_logits(mc->net, x_val);
        } else if (const auto* bbb = std::get_if<BbbModel>(&model.model)) {
          logits = mlp_logits(bbb_mean_weights(bbb->params), x_val);
        }
        val_loss = mean_val_bce(logits, y_val);
      }
      if (!std::isfinite(val_loss)) diverged = true;
    } catch (const std::runtime_error&) {
      diverged = true;
    }
    record.val_loss =
        diverged ? std::numeric_limits<double>::quiet_NaN() : val_loss;
    record.diverged = diverged;

    if (!diverged && val_loss < result.best_val_loss) {
      result.best = record.hyperparams;
      result.best_trial = trial;
      result.best_val_loss = val_loss;
    }
    result.trials.push_back(std::move(record));
  }

  if (result.best_trial < 0) {
    std::string indices;
    for (const TrialRecord& record : result.trials) {
      if (!indices.empty()) indices += ", ";
      indices += std::to_string(record.trial);
    }
    throw std::runtime_error("all search trials diverged: " + indices);
  }
  return result;
}

nlohmann::ordered_json search_result_to_json(const SearchResult& result) {
  ordered_json trials = ordered_json::array();
  for (const TrialRecord& record : result.trials) {
    ordered_json entry;
    entry["trial"] = record.trial;
    entry["diverged"] = record.diverged;
    if (record.diverged) {
      entry["val_loss"] = nullptr;
    } else {
      entry["val_loss"] = record.val_loss;
    }
    entry["hyperparams"] = hyperparams_to_json(record.hyperparams);
    trials.push_back(std::move(entry));
  }
  return ordered_json{{"model", result.model},
                      {"budget", static_cast<int>(result.trials.size())},
                      {"best_trial", result.best_trial},
                      {"best_val_loss", result.best_val_loss},
                      {"best", hyperparams_to_json(result.best)},
                      {"trials", std::move(trials)}};
}

}  // namespace uqtab
