#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uqtab/episode.hpp"
#include "uqtab/features.hpp"
#include "uqtab/model.hpp"

namespace uqtab {

// Feature rows, labels and group tags for one cohort, in episode order.
struct Cohort {
  FeatureMatrix features;  // engineered, unscaled
  std::vector<int> labels;
  std::vector<std::vector<std::string>> row_groups;
};

Cohort cohort_from_episodes(const std::vector<Episode>& episodes);

// Joins an engineered-features CSV with a labels CSV by patient id, keeping
// the feature file's row order. Every feature row must have a labels entry.
Cohort load_cohort(const std::string& features_path,
                   const std::string& labels_path);

// One aggregated report row: a (model, metric) score within one
// group-or-factor context, averaged over the experiment's repetition axis.
struct ResultRow {
  std::string model;
  std::string metric;           // uncertainty metric name or "mortality_auc"
  std::string group_or_factor;  // scaling factor, group tag, direction, or ""
  double mean = 0.0;
  double stdev = 0.0;
  bool has_std = false;  // std is only reported from >= 2 repetitions
  int n = 0;
};

// Group metadata attached to holdout reports.
struct GroupSummary {
  std::string tag;
  int n_rows = 0;
  double relative_size = 0.0;  // group rows / training rows after removal
  double significant_feature_fraction = 0.0;  // Welch p < 0.01 column share
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t master_seed = 0;
  nlohmann::ordered_json config;
  std::vector<GroupSummary> groups;  // group-holdout only
  std::vector<ResultRow> rows;
};

// Scoring hook. Experiments score models through this so tests can inject
// synthetic metrics; `ood_side` says which side of an OOD comparison the
// scores feed. The default scorer ignores it.
struct ScoreRequest {
  const TrainedModel* model = nullptr;
  const Matrix* x = nullptr;
  bool ood_side = false;
  RngStream* rng = nullptr;
  int n_samples = 1;  // stochastic prediction count for the default scorer
};
using ScorerFn = std::function<std::vector<UncertaintyScores>(const ScoreRequest&)>;

struct ExperimentOptions {
  std::uint64_t master_seed = 0;
  int n_runs = 5;
  double split_ratios[3] = {0.70, 0.15, 0.15};  // train, validation, test
  // Model roster; empty selects the full registry. Overrides replace the
  // registry defaults for the named models (e.g. tuned configurations).
  std::vector<std::string> models;
  std::vector<std::pair<std::string, Hyperparams>> overrides;
  ScorerFn scorer;  // empty = registry metrics via compute_model_scores
};

// Mortality AUC-ROC per classifier, mean +- std over n_runs retrainings on
// one fixed split.
ExperimentReport evaluate_mortality(const Cohort& cohort,
                                    const ExperimentOptions& options);

// Single-feature corruption: per factor, `repeats` distinct standardized
// columns are scaled on a copy of the test set and every (model, metric)
// scores the original vs the corrupted copy; rows aggregate over repeats.
ExperimentReport perturbation_experiment(const Cohort& cohort,
                                         const std::vector<double>& factors,
                                         int repeats,
                                         const ExperimentOptions& options);

// Holds each tagged group out of train+val, then scores the in-distribution
// test set against the group. Empty `group_tags` selects every tag present.
ExperimentReport group_holdout_experiment(const Cohort& cohort,
                                          const std::vector<std::string>& group_tags,
                                          const ExperimentOptions& options);

// Trains on each cohort and treats the entire other cohort as OOD, in both
// directions; also reports target-domain mortality AUC.
ExperimentReport cross_dataset_experiment(const Cohort& source_a,
                                          const std::string& name_a,
                                          const Cohort& source_b,
                                          const std::string& name_b,
                                          const ExperimentOptions& options);

// Stable serialized forms: pretty JSON with fixed key order, and the flat
// CSV `experiment,model,metric,group_or_factor,mean,std,n`.
nlohmann::ordered_json report_to_json(const ExperimentReport& report);
std::string report_to_csv(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::ordered_json& doc);

// Whole-file write through a temp file + rename, so a crash mid-write never
// leaves a truncated report behind.
void write_text_atomic(const std::string& path, const std::string& content);

struct ReportPaths {
  std::string json_path;
  std::string csv_path;
};

// Writes <dir>/<experiment>_seed<seed>.{json,csv}, overwriting atomically.
ReportPaths write_report(const ExperimentReport& report, const std::string& dir);

}  // namespace uqtab
