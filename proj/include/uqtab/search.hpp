#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "uqtab/matrix.hpp"
#include "uqtab/model.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

struct TrialRecord {
  int trial = 0;
  Hyperparams hyperparams;
  double val_loss = 0.0;  // NaN when the trial diverged
  bool diverged = false;
};

struct SearchResult {
  std::string model;
  Hyperparams best;
  int best_trial = -1;
  double best_val_loss = 0.0;
  std::vector<TrialRecord> trials;
};

// Searchable families: LogReg, NN, MCDropout, BBB, AE. The temperature-
// scaled variant and the ensembles reuse whatever configuration NN gets.
bool is_searchable_model(const std::string& model_name);

// 60 trials for BBB, 4 for LogReg (its grid is exhaustive), 40 otherwise.
int default_search_budget(const std::string& model_name);

// Draws one configuration from the family's search distributions. LogReg
// ignores the stream and walks its C grid round-robin by trial index.
Hyperparams sample_hyperparams(const std::string& model_name, int trial,
                               RngStream& rng);

// Random search over `budget` trials on a fixed train/validation split.
// Every trial is scored by validation loss — BCE for classifiers (BBB under
// its posterior-mean weights), reconstruction MSE for AE — and the lowest
// score wins, ties breaking toward the earlier trial. Trials whose training
// degenerates to non-finite loss are recorded as diverged; if every trial
// diverges the search throws, listing the trial indices.
SearchResult random_search(const std::string& model_name, int budget,
                           const Matrix& x_train, const std::vector<int>& y_train,
                           const Matrix& x_val, const std::vector<int>& y_val,
                           std::uint64_t master_seed);

// Full trial log plus the winning configuration, for the tune output file.
nlohmann::ordered_json search_result_to_json(const SearchResult& result);

}  // namespace uqtab
