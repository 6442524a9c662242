#pragma once

#include <vector>

#include "uqtab/features.hpp"
#include "uqtab/matrix.hpp"

namespace uqtab {

struct WelchResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;  // two-sided
  // Both sides (numerically) constant: t/p fall back to 0/1 by convention.
  bool degenerate = false;
};

// Mann-Whitney AUC: over all (positive, negative) pairs, a higher positive
// score counts 1 and a tie counts 0.5. Computed from midranks with integer
// accumulation, so e.g. all-equal scores give exactly 0.5.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// AUC of `uncertainty separates OOD from ID`: OOD rows are the positives.
double ood_auc(const std::vector<double>& id_scores,
               const std::vector<double>& ood_scores);

// Unequal-variance two-sample t-test with Welch-Satterthwaite degrees of
// freedom; two-sided p via the t-distribution CDF.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// Fraction of columns whose ID-vs-OOD Welch test has p < alpha. Columns
// where either side is degenerate (constant, or fewer than 2 rows) count as
// not significant.
double significant_fraction(const Matrix& id_rows, const Matrix& ood_rows,
                            double alpha);
double significant_feature_fraction(const FeatureMatrix& x_id,
                                    const FeatureMatrix& x_ood, double alpha);

}  // namespace uqtab
