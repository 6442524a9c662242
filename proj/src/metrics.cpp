#include "uqtab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "uqtab/csv.hpp"
#include "uqtab/kernels.hpp"

namespace uqtab {
namespace {

void check_ensemble(const PredictionEnsemble& ens) {
  if (ens.rows() < 1) throw std::runtime_error("prediction ensemble needs K >= 1");
  for (double p : ens.storage()) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::runtime_error("prediction ensemble entries must lie in [0, 1]");
    }
  }
}

}  // namespace

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

UncertaintyScores max_prob_uncertainty(const std::vector<double>& probs) {
  UncertaintyScores s;
  s.metric_name = "max_prob";
  s.values.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::runtime_error("max_prob_uncertainty: probability outside [0, 1]");
    }
    s.values[i] = 1.0 - std::max(p, 1.0 - p);
  }
  return s;
}

UncertaintyScores class1_std(const PredictionEnsemble& ens) {
  check_ensemble(ens);
  const int k = ens.rows();
  const int n = ens.cols();
  UncertaintyScores s;
  s.metric_name = "std";
  s.values.assign(n, 0.0);
  kernels::parallel_for(n, [&](int i) {
    double mean = 0.0;
    for (int r = 0; r < k; ++r) mean += ens(r, i);
    mean /= k;
    double m2 = 0.0;
    for (int r = 0; r < k; ++r) {
      const double d = ens(r, i) - mean;
      m2 += d * d;
    }
    s.values[i] = std::sqrt(m2 / k);
  });
  return s;
}

UncertaintyScores predictive_entropy(const PredictionEnsemble& ens) {
  check_ensemble(ens);
  const int k = ens.rows();
  const int n = ens.cols();
  UncertaintyScores s;
  s.metric_name = "entropy";
  s.values.assign(n, 0.0);
  kernels::parallel_for(n, [&](int i) {
    double mean = 0.0;
    for (int r = 0; r < k; ++r) mean += ens(r, i);
    mean /= k;
    s.values[i] = binary_entropy(mean);
  });
  return s;
}

UncertaintyScores mutual_information(const PredictionEnsemble& ens) {
  check_ensemble(ens);
  const int k = ens.rows();
  const int n = ens.cols();
  UncertaintyScores s;
  s.metric_name = "mutual_information";
  s.values.assign(n, 0.0);
  kernels::parallel_for(n, [&](int i) {
    double mean = 0.0;
    double member_entropy = 0.0;
    for (int r = 0; r < k; ++r) {
      mean += ens(r, i);
      member_entropy += binary_entropy(ens(r, i));
    }
    mean /= k;
    member_entropy /= k;
    // Jensen guarantees the true value is >= 0; round-off can dip under.
    s.values[i] = std::max(binary_entropy(mean) - member_entropy, 0.0);
  });
  return s;
}

void write_scores_csv(const std::vector<std::string>& row_ids,
                      const std::vector<UncertaintyScores>& scores,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scores file: " + path);
  out << "row_id,metric,value\n";
  for (const auto& metric : scores) {
    if (metric.values.size() != row_ids.size()) {
      throw std::runtime_error("write_scores_csv: row count mismatch");
    }
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
      out << row_ids[i] << ',' << metric.metric_name << ','
          << csv::format_double(metric.values[i]) << '\n';
    }
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

}  // namespace uqtab
