#pragma once

#include <vector>

namespace uqtab {

// Picks the temperature T in [0.05, 20] minimizing the validation BCE of
// sigmoid(logit / T), by golden-section search to 1e-4. T = 1 is always
// evaluated as a fallback, so calibration can never worsen validation BCE.
double fit_temperature(const std::vector<double>& val_logits,
                       const std::vector<int>& val_labels);

// Mean BCE of sigmoid(logit / t) against the labels.
double scaled_bce(const std::vector<double>& logits, const std::vector<int>& labels,
                  double t);

}  // namespace uqtab
