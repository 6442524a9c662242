#pragma once

#include <string>
#include <vector>

#include "uqtab/episode.hpp"
#include "uqtab/matrix.hpp"
#include "uqtab/rng.hpp"

namespace uqtab {

// N x D design matrix plus naming metadata. Missing cells (empty feature
// windows) are NaN until apply_scaler imputes them.
struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> column_names;  // variable|window|statistic
  std::vector<std::string> row_ids;       // patient ids, episode order
};

// Per-column standardization statistics, fitted on training rows only.
struct ScalerStats {
  std::vector<double> mean;
  std::vector<double> stdev;        // population std, floored (see fit_scaler)
  std::vector<double> impute_mean;  // train mean of non-missing cells
};

struct DatasetSplit {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

// The seven time windows, as fractions of the [0, 48h] axis, in column order.
extern const char* const kWindowNames[7];
// The six per-window statistics, in column order.
extern const char* const kStatNames[6];

// Summarizes each episode into 42 features per variable: the six statistics
// {min, max, mean, std, skew, count} over seven windows {full, first/last
// 10%, 25%, 50% of the 48h axis}. Windows are closed-left/open-right except
// that the axis end t=48 is included. Empty windows yield NaN statistics but
// count 0. Output row order follows episode order.
FeatureMatrix engineer_features(const std::vector<Episode>& episodes,
                                const std::vector<std::string>& variables);

// Fits mean/std on the given training rows. Missing cells are first imputed
// to the train column mean; std is the population std of the imputed column,
// with values below 1e-12 floored to 1 so constant columns scale to 0.
ScalerStats fit_scaler(const FeatureMatrix& features,
                       const std::vector<int>& train_rows);

// Imputes missing cells to the train mean, then standardizes every column.
FeatureMatrix apply_scaler(const ScalerStats& stats, const FeatureMatrix& features);

// Uniform random permutation followed by a contiguous cut. Validation and
// test sizes are floor(n * ratio); the remainder goes to train.
DatasetSplit split_dataset(int n_rows, const double (&ratios)[3], RngStream& rng);

// Returns a copy with one column multiplied by `factor` (applied to
// standardized features); every other cell is bit-identical.
FeatureMatrix perturb_feature(const FeatureMatrix& features, int column,
                              double factor);

// CSV persistence: header `patient_id,<column names...>`; missing cells are
// written as empty fields and read back as NaN.
void write_features_csv(const FeatureMatrix& features, const std::string& path);
FeatureMatrix read_features_csv(const std::string& path);

// Convenience: labels in episode order, and the matrix restricted to a row set.
std::vector<int> episode_labels(const std::vector<Episode>& episodes);
Matrix take_rows(const Matrix& m, const std::vector<int>& rows);
std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<int>& rows);

}  // namespace uqtab
