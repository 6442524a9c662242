#include "uqtab/temperature.hpp"

#include <cmath>
#include <stdexcept>

#include "uqtab/numerics.hpp"

namespace uqtab {

double scaled_bce(const std::vector<double>& logits, const std::vector<int>& labels,
                  double t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    sum += bce_from_logit(logits[i] / t, static_cast<double>(labels[i]));
  }
  return sum / static_cast<double>(logits.size());
}

double fit_temperature(const std::vector<double>& val_logits,
                       const std::vector<int>& val_labels) {
  if (val_logits.empty() || val_logits.size() != val_labels.size()) {
    throw std::runtime_error("fit_temperature: logits/labels mismatch");
  }
  bool has_pos = false, has_neg = false;
  for (int y : val_labels) {
    if (y == 1) has_pos = true;
    else if (y == 0) has_neg = true;
    else throw std::runtime_error("fit_temperature: labels must be 0 or 1");
  }
  if (!has_pos || !has_neg) {
    throw std::runtime_error(
        "fit_temperature: validation set must contain both classes");
  }

  // BCE is convex in 1/T, hence unimodal in T: golden-section applies.
  constexpr double kLo = 0.05;
  constexpr double kHi = 20.0;
  constexpr double kTol = 1e-4;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = kLo, hi = kHi;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = scaled_bce(val_logits, val_labels, x1);
  double f2 = scaled_bce(val_logits, val_labels, x2);
  while (hi - lo > kTol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = scaled_bce(val_logits, val_labels, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = scaled_bce(val_logits, val_labels, x2);
    }
  }
  const double best_t = 0.5 * (lo + hi);
  if (scaled_bce(val_logits, val_labels, 1.0) <
      scaled_bce(val_logits, val_labels, best_t)) {
    return 1.0;
  }
  return best_t;
}

}  // namespace uqtab
