#include "uqtab/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "uqtab/csv.hpp"
#include "uqtab/kernels.hpp"

namespace uqtab {

const char* const kWindowNames[7] = {"full",    "first10", "last10", "first25",
                                     "last25",  "first50", "last50"};
const char* const kStatNames[6] = {"min", "max", "mean", "std", "skew", "count"};

namespace {

constexpr double kAxisEnd = 48.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Window {
  double lo;
  double hi;
};

// Fractions of the [0, 48] axis, same order as kWindowNames.
const Window kWindows[7] = {
    {0.0, 48.0}, {0.0, 4.8},  {43.2, 48.0}, {0.0, 12.0},
    {36.0, 48.0}, {0.0, 24.0}, {24.0, 48.0},
};

bool in_window(double t, const Window& w) {
  // Closed-left / open-right, except the axis end itself stays included.
  if (t < w.lo) return false;
  if (w.hi == kAxisEnd) return t <= kAxisEnd;
  return t < w.hi;
}

// min, max, mean, std, skew, count for one window's values.
void window_stats(const std::vector<double>& xs, double out[6]) {
  const int n = static_cast<int>(xs.size());
  out[5] = static_cast<double>(n);
  if (n == 0) {
    out[0] = out[1] = out[2] = out[3] = out[4] = kNaN;
    return;
  }
  double mn = xs[0], mx = xs[0], sum = 0.0;
  for (double x : xs) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
    sum += x;
  }
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  out[0] = mn;
  out[1] = mx;
  out[2] = mean;
  out[3] = n >= 2 ? std::sqrt(m2) : 0.0;
  // Fisher-Pearson g1; undefined for < 3 points or (numerically) constant
  // windows, which get 0 instead.
  const double var_guard = 1e-24 * std::max(1.0, mean * mean);
  out[4] = (n >= 3 && m2 > var_guard) ? m3 / (m2 * std::sqrt(m2)) : 0.0;
}

}  // namespace

FeatureMatrix engineer_features(const std::vector<Episode>& episodes,
                                const std::vector<std::string>& variables) {
  if (variables.empty()) throw std::runtime_error("variables list is empty");
  const int n = static_cast<int>(episodes.size());
  const int d = static_cast<int>(variables.size()) * 7 * 6;

  FeatureMatrix fm;
  fm.values = Matrix(n, d);
  fm.column_names.reserve(d);
  for (const auto& var : variables) {
    for (const auto* win : kWindowNames) {
      for (const auto* stat : kStatNames) {
        fm.column_names.push_back(var + "|" + win + "|" + stat);
      }
    }
  }
  fm.row_ids.resize(n);
  for (int i = 0; i < n; ++i) fm.row_ids[i] = episodes[i].patient_id;

  // Each episode fills exactly its own row, so rows can be computed in
  // parallel without changing any result.
  kernels::parallel_for(n, [&](int i) {
    const Episode& ep = episodes[i];
    double* row = fm.values.row(i);
    std::vector<double> bucket;
    int col = 0;
    for (const auto& var : variables) {
      auto it = ep.series.find(var);
      const std::vector<Measurement>* ms = it == ep.series.end() ? nullptr : &it->second;
      for (const Window& w : kWindows) {
        bucket.clear();
        if (ms) {
          for (const Measurement& m : *ms) {
            if (in_window(m.time_hours, w)) bucket.push_back(m.value);
          }
        }
        window_stats(bucket, row + col);
        col += 6;
      }
    }
  });
  return fm;
}

ScalerStats fit_scaler(const FeatureMatrix& features,
                       const std::vector<int>& train_rows) {
  if (train_rows.size() < 2) {
    throw std::runtime_error("fit_scaler needs at least 2 training rows");
  }
  const int d = features.values.cols();
  ScalerStats st;
  st.mean.assign(d, 0.0);
  st.stdev.assign(d, 0.0);
  st.impute_mean.assign(d, 0.0);
  const int n = static_cast<int>(train_rows.size());

  for (int j = 0; j < d; ++j) {
    double sum = 0.0;
    int present = 0;
    for (int r : train_rows) {
      const double x = features.values(r, j);
      if (!std::isnan(x)) {
        sum += x;
        ++present;
      }
    }
    st.impute_mean[j] = present > 0 ? sum / present : 0.0;
    // Mean/std of the imputed column: imputed cells sit at the mean, so the
    // column mean equals the imputation mean and they add zero deviation.
    st.mean[j] = st.impute_mean[j];
    double m2 = 0.0;
    for (int r : train_rows) {
      const double x = features.values(r, j);
      if (!std::isnan(x)) {
        const double dlt = x - st.mean[j];
        m2 += dlt * dlt;
      }
    }
    double sd = std::sqrt(m2 / n);
    if (sd < 1e-12) sd = 1.0;  // constant columns scale to exactly 0
    st.stdev[j] = sd;
  }
  return st;
}

FeatureMatrix apply_scaler(const ScalerStats& stats, const FeatureMatrix& features) {
  const int d = features.values.cols();
  if (static_cast<int>(stats.mean.size()) != d) {
    throw std::runtime_error("scaler was fitted for a different column count");
  }
  FeatureMatrix out = features;
  const int n = out.values.rows();
  kernels::parallel_for(n, [&](int i) {
    double* row = out.values.row(i);
    for (int j = 0; j < d; ++j) {
      const double x = std::isnan(row[j]) ? stats.impute_mean[j] : row[j];
      row[j] = (x - stats.mean[j]) / stats.stdev[j];
    }
  });
  return out;
}

DatasetSplit split_dataset(int n_rows, const double (&ratios)[3], RngStream& rng) {
  if (n_rows < 3) throw std::runtime_error("need at least 3 rows to split");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::runtime_error("split ratios must sum to 1");
  }
  std::vector<int> perm(n_rows);
  for (int i = 0; i < n_rows; ++i) perm[i] = i;
  // Fisher-Yates driven by the stream, so the split is seed-reproducible.
  for (int i = n_rows - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  const int n_val = static_cast<int>(n_rows * ratios[1]);
  const int n_test = static_cast<int>(n_rows * ratios[2]);
  const int n_train = n_rows - n_val - n_test;
  DatasetSplit split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.validation.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  split.test.assign(perm.begin() + n_train + n_val, perm.end());
  return split;
}

FeatureMatrix perturb_feature(const FeatureMatrix& features, int column,
                              double factor) {
  if (column < 0 || column >= features.values.cols()) {
    throw std::runtime_error("perturb_feature: column out of range");
  }
  if (!(factor > 0.0)) throw std::runtime_error("perturb_feature: factor must be > 0");
  FeatureMatrix out = features;
  for (int i = 0; i < out.values.rows(); ++i) {
    out.values(i, column) *= factor;
  }
  return out;
}

void write_features_csv(const FeatureMatrix& features, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write features file: " + path);
  out << "patient_id";
  for (const auto& name : features.column_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < features.values.rows(); ++i) {
    out << features.row_ids[i];
    const double* row = features.values.row(i);
    for (int j = 0; j < features.values.cols(); ++j) {
      out << ',';
      if (!std::isnan(row[j])) out << csv::format_double(row[j]);
    }
    out << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

FeatureMatrix read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open features file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = csv::split_fields(line);
  if (header.size() < 2 || header[0] != "patient_id") {
    throw std::runtime_error(path + ": expected header patient_id,<columns>");
  }
  FeatureMatrix fm;
  for (size_t j = 1; j < header.size(); ++j) {
    fm.column_names.emplace_back(header[j]);
  }
  const int d = static_cast<int>(fm.column_names.size());

  std::vector<double> cells;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::split_fields(line);
    if (static_cast<int>(fields.size()) != d + 1) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(d + 1) + " fields");
    }
    fm.row_ids.emplace_back(fields[0]);
    for (int j = 0; j < d; ++j) {
      double x = kNaN;
      if (!fields[j + 1].empty()) {
        const auto parsed = csv::parse_double(fields[j + 1]);
        if (!parsed) {
          throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                   ": bad value '" + std::string(fields[j + 1]) + "'");
        }
        x = *parsed;
      }
      cells.push_back(x);
    }
  }
  fm.values = Matrix(static_cast<int>(fm.row_ids.size()), d);
  std::copy(cells.begin(), cells.end(), fm.values.storage().begin());
  return fm;
}

std::vector<int> episode_labels(const std::vector<Episode>& episodes) {
  std::vector<int> labels(episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i) labels[i] = episodes[i].label;
  return labels;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = m.row(rows[i]);
    std::copy(src, src + m.cols(), out.row(static_cast<int>(i)));
  }
  return out;
}

std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<int>& rows) {
  std::vector<int> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

}  // namespace uqtab
