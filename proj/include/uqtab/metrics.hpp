#pragma once

#include <string>
#include <vector>

#include "uqtab/matrix.hpp"

namespace uqtab {

// A K x N matrix of positive-class probabilities: K prediction sources
// (ensemble members, dropout passes, posterior draws) by N samples.
using PredictionEnsemble = Matrix;

// All scores share one orientation: larger = less confident / more novel.
struct UncertaintyScores {
  std::string metric_name;
  std::vector<double> values;
};

// 1 - max(p, 1-p): the flipped max-probability baseline.
UncertaintyScores max_prob_uncertainty(const std::vector<double>& probs);

// Population std of the K positive-class probabilities per sample.
UncertaintyScores class1_std(const PredictionEnsemble& ens);

// Shannon entropy (nats) of the ensemble-mean probability per sample.
UncertaintyScores predictive_entropy(const PredictionEnsemble& ens);

// H[mean prediction] - mean member entropy, clamped at 0 from below.
UncertaintyScores mutual_information(const PredictionEnsemble& ens);

// Binary entropy in nats with 0 ln 0 := 0.
double binary_entropy(double p);

// Writes scores as CSV rows `row_id,metric,value`.
void write_scores_csv(const std::vector<std::string>& row_ids,
                      const std::vector<UncertaintyScores>& scores,
                      const std::string& path);

}  // namespace uqtab
