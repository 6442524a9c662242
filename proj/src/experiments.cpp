#include "uqtab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "uqtab/csv.hpp"
#include "uqtab/evaluation.hpp"

namespace uqtab {

using nlohmann::ordered_json;

namespace {

// One roster entry with its effective hyperparameters.
struct ActiveModel {
  const ModelSpec* spec = nullptr;
  Hyperparams hp;
};

std::vector<ActiveModel> resolve_models(const ExperimentOptions& options) {
  std::vector<ActiveModel> active;
  if (options.models.empty()) {
    for (const ModelSpec& spec : model_registry()) {
      active.push_back({&spec, spec.defaults});
    }
  } else {
    for (const std::string& name : options.models) {
      const ModelSpec& spec = find_model_spec(name);
      for (const ActiveModel& existing : active) {
        if (existing.spec->name == name) {
          throw std::invalid_argument("duplicate model name: " + name);
        }
      }
      active.push_back({&spec, spec.defaults});
    }
  }
  // Overrides for models outside the selection are simply unused.
  for (const auto& [name, hp] : options.overrides) {
    for (ActiveModel& model : active) {
      if (model.spec->name == name) model.hp = hp;
    }
  }
  return active;
}

// Scores one model through the configured hook; the stream is taken by
// value so every call starts from the same derived state, making scores a
// pure function of (model, data, stream seed).
std::vector<UncertaintyScores> score_model(const ExperimentOptions& options,
                                           const ActiveModel& active,
                                           const TrainedModel& model,
                                           const Matrix& x, bool ood_side,
                                           RngStream rng) {
  if (options.scorer) {
    const ScoreRequest request{&model, &x, ood_side, &rng,
                               active.hp.n_samples};
    return options.scorer(request);
  }
  return compute_model_scores(model, x, active.hp.n_samples, rng);
}

// Collects samples keyed by (model, metric, group_or_factor). Rows are
// ordered by first appearance, which the experiments keep deterministic by
// looping models/metrics/contexts in a fixed order; aggregation is mean /
// sample std (ddof = 1, reported only from two samples up).
class RowBuilder {
 public:
  void record(const std::string& model, const std::string& metric,
              const std::string& group_or_factor, double value) {
    const std::string key = model + '\x1f' + metric + '\x1f' + group_or_factor;
    auto [it, inserted] =
        index_.try_emplace(key, static_cast<int>(rows_.size()));
    if (inserted) {
      rows_.push_back({model, metric, group_or_factor, 0.0, 0.0, false, 0});
      samples_.emplace_back();
    }
    samples_[static_cast<std::size_t>(it->second)].push_back(value);
  }

  std::vector<ResultRow> finish() {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const std::vector<double>& values = samples_[i];
      const int n = static_cast<int>(values.size());
      double mean = 0.0;
      for (double v : values) mean += v;
      if (n > 0) mean /= n;
      rows_[i].mean = mean;
      rows_[i].n = n;
      if (n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        rows_[i].stdev = std::sqrt(ss / (n - 1));
        rows_[i].has_std = true;
      }
    }
    return std::move(rows_);
  }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<ResultRow> rows_;
  std::vector<std::vector<double>> samples_;
};

// Pairs up the two sides of an OOD comparison and records one AUC per
// metric; the scorer must emit the same metrics for both sides.
void record_ood_rows(RowBuilder& builder, const std::string& model,
                     const std::string& group_or_factor,
                     const std::vector<UncertaintyScores>& id_scores,
                     const std::vector<UncertaintyScores>& ood_scores) {
  if (id_scores.size() != ood_scores.size()) {
    throw std::runtime_error("scorer returned inconsistent metric sets");
  }
  for (std::size_t s = 0; s < id_scores.size(); ++s) {
    if (id_scores[s].metric_name != ood_scores[s].metric_name) {
      throw std::runtime_error("scorer returned inconsistent metric sets");
    }
    builder.record(model, id_scores[s].metric_name, group_or_factor,
                   ood_auc(id_scores[s].values, ood_scores[s].values));
  }
}

struct ScaledSplit {
  DatasetSplit split;
  ScalerStats scaler;
  FeatureMatrix scaled;  // full cohort, imputed + standardized
  Matrix x_train, x_val, x_test;
  std::vector<int> y_train, y_val, y_test;
};

// Fixed split (stream `label`/0 of the master seed) + scaler fitted on the
// training rows only, shared by every run of an experiment.
ScaledSplit prepare_split(const Cohort& cohort, const ExperimentOptions& options,
                          const std::string& label) {
  ScaledSplit prepared;
  RngStream split_rng(options.master_seed, label, 0);
  prepared.split = split_dataset(cohort.features.values.rows(),
                                 options.split_ratios, split_rng);
  prepared.scaler = fit_scaler(cohort.features, prepared.split.train);
  prepared.scaled = apply_scaler(prepared.scaler, cohort.features);
  prepared.x_train = take_rows(prepared.scaled.values, prepared.split.train);
  prepared.x_val = take_rows(prepared.scaled.values, prepared.split.validation);
  prepared.x_test = take_rows(prepared.scaled.values, prepared.split.test);
  prepared.y_train = take_labels(cohort.labels, prepared.split.train);
  prepared.y_val = take_labels(cohort.labels, prepared.split.validation);
  prepared.y_test = take_labels(cohort.labels, prepared.split.test);
  return prepared;
}

ordered_json base_config(const ExperimentOptions& options,
                         const std::vector<ActiveModel>& active) {
  ordered_json models = ordered_json::array();
  for (const ActiveModel& model : active) models.push_back(model.spec->name);
  ordered_json overrides = ordered_json::object();
  for (const auto& [name, hp] : options.overrides) {
    overrides[name] = hyperparams_to_json(hp);
  }
  return ordered_json{{"n_runs", options.n_runs},
                      {"split_ratios",
                       {options.split_ratios[0], options.split_ratios[1],
                        options.split_ratios[2]}},
                      {"models", std::move(models)},
                      {"overrides", std::move(overrides)}};
}

void check_cohort(const Cohort& cohort) {
  const int n = cohort.features.values.rows();
  if (static_cast<int>(cohort.labels.size()) != n ||
      (!cohort.row_groups.empty() &&
       static_cast<int>(cohort.row_groups.size()) != n)) {
    throw std::invalid_argument("cohort rows, labels and groups disagree");
  }
}

bool has_both_classes(const std::vector<int>& labels) {
  bool any0 = false, any1 = false;
  for (int y : labels) (y == 1 ? any1 : any0) = true;
  return any0 && any1;
}

}  // namespace

Cohort cohort_from_episodes(const std::vector<Episode>& episodes) {
  Cohort cohort;
  cohort.features = engineer_features(episodes, collect_variables(episodes));
  cohort.labels = episode_labels(episodes);
  cohort.row_groups.reserve(episodes.size());
  for (const Episode& episode : episodes) {
    cohort.row_groups.push_back(episode.groups);
  }
  return cohort;
}

Cohort load_cohort(const std::string& features_path,
                   const std::string& labels_path) {
  Cohort cohort;
  cohort.features = read_features_csv(features_path);
  const std::vector<LabelRecord> records = read_labels_csv(labels_path);
  std::unordered_map<std::string, const LabelRecord*> by_id;
  by_id.reserve(records.size());
  for (const LabelRecord& record : records) by_id[record.patient_id] = &record;
  cohort.labels.reserve(cohort.features.row_ids.size());
  cohort.row_groups.reserve(cohort.features.row_ids.size());
  for (const std::string& id : cohort.features.row_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::runtime_error("patient '" + id + "' missing from " + labels_path);
    }
    cohort.labels.push_back(it->second->label);
    cohort.row_groups.push_back(it->second->groups);
  }
  return cohort;
}

ExperimentReport evaluate_mortality(const Cohort& cohort,
                                    const ExperimentOptions& options) {
  check_cohort(cohort);
  if (options.n_runs < 1) {
    throw std::invalid_argument("n_runs must be positive");
  }
  std::vector<ActiveModel> active = resolve_models(options);
  std::erase_if(active,
                [](const ActiveModel& m) { return !m.spec->is_classifier; });
  const ScaledSplit prepared = prepare_split(cohort, options, "split");

  RowBuilder builder;
  for (int run = 0; run < options.n_runs; ++run) {
    for (const ActiveModel& active_model : active) {
      RngStream rng(options.master_seed,
                    "mortality/train/" + active_model.spec->name, run);
      const TrainedModel model = train_model(
          *active_model.spec, active_model.hp, prepared.x_train,
          prepared.y_train, prepared.x_val, prepared.y_val, rng);
      builder.record(active_model.spec->name, "mortality_auc", "",
                     auc_roc(predict_mean_proba(model, prepared.x_test),
                             prepared.y_test));
    }
  }

  ExperimentReport report;
  report.experiment = "mortality";
  report.master_seed = options.master_seed;
  report.config = base_config(options, active);
  report.rows = builder.finish();
  return report;
}

ExperimentReport perturbation_experiment(const Cohort& cohort,
                                         const std::vector<double>& factors,
                                         int repeats,
                                         const ExperimentOptions& options) {
  check_cohort(cohort);
  const int n_cols = cohort.features.values.cols();
  if (factors.empty()) throw std::invalid_argument("no scaling factors given");
  if (repeats < 1) throw std::invalid_argument("repeats must be positive");
  if (repeats > n_cols) {
    throw std::invalid_argument(
        "repeats exceeds the feature count (" + std::to_string(repeats) +
        " > " + std::to_string(n_cols) + ")");
  }
  const std::vector<ActiveModel> active = resolve_models(options);
  const ScaledSplit prepared = prepare_split(cohort, options, "split");

  FeatureMatrix test_features;
  test_features.values = prepared.x_test;
  test_features.column_names = prepared.scaled.column_names;
  for (int r : prepared.split.test) {
    test_features.row_ids.push_back(prepared.scaled.row_ids[r]);
  }

  // Column draws per factor: `repeats` distinct columns, partial
  // Fisher-Yates over the column indices.
  std::vector<std::vector<int>> factor_columns;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    RngStream column_rng(options.master_seed, "perturb/columns",
                         static_cast<std::uint64_t>(f));
    std::vector<int> columns(static_cast<std::size_t>(n_cols));
    for (int c = 0; c < n_cols; ++c) columns[static_cast<std::size_t>(c)] = c;
    for (int i = 0; i < repeats; ++i) {
      const int j = i + static_cast<int>(column_rng.uniform_int(
                            static_cast<std::uint64_t>(n_cols - i)));
      std::swap(columns[static_cast<std::size_t>(i)],
                columns[static_cast<std::size_t>(j)]);
    }
    columns.resize(static_cast<std::size_t>(repeats));
    factor_columns.push_back(std::move(columns));
  }

  RowBuilder builder;
  for (std::size_t m = 0; m < active.size(); ++m) {
    const std::string& name = active[m].spec->name;
    RngStream train_rng(options.master_seed, "perturb/train/" + name, 0);
    const TrainedModel model =
        train_model(*active[m].spec, active[m].hp, prepared.x_train,
                    prepared.y_train, prepared.x_val, prepared.y_val,
                    train_rng);
    // The scoring stream restarts from the same seed for the original set
    // and for every corrupted copy, so identical inputs (factor 1) produce
    // identical scores and an OOD AUC of exactly one half.
    const auto score_rng = [&] {
      return RngStream(options.master_seed, "perturb/score/" + name, 0);
    };
    const std::vector<UncertaintyScores> id_scores = score_model(
        options, active[m], model, test_features.values, false, score_rng());

    for (std::size_t f = 0; f < factors.size(); ++f) {
      for (int rep = 0; rep < repeats; ++rep) {
        const FeatureMatrix corrupted = perturb_feature(
            test_features, factor_columns[f][static_cast<std::size_t>(rep)],
            factors[f]);
        const std::vector<UncertaintyScores> ood_scores = score_model(
            options, active[m], model, corrupted.values, true, score_rng());
        record_ood_rows(builder, name, csv::format_double(factors[f]),
                        id_scores, ood_scores);
      }
    }
  }

  ExperimentReport report;
  report.experiment = "perturbation";
  report.master_seed = options.master_seed;
  report.config = base_config(options, active);
  report.config["factors"] = factors;
  report.config["repeats"] = repeats;
  report.rows = builder.finish();
  return report;
}

ExperimentReport group_holdout_experiment(const Cohort& cohort,
                                          const std::vector<std::string>& group_tags,
                                          const ExperimentOptions& options) {
  check_cohort(cohort);
  if (options.n_runs < 1) {
    throw std::invalid_argument("n_runs must be positive");
  }
  if (cohort.row_groups.empty()) {
    throw std::invalid_argument("cohort has no group tags");
  }
  std::vector<std::string> tags = group_tags;
  if (tags.empty()) {
    std::set<std::string> seen;
    for (const std::vector<std::string>& groups : cohort.row_groups) {
      seen.insert(groups.begin(), groups.end());
    }
    tags.assign(seen.begin(), seen.end());
  }
  if (tags.empty()) throw std::invalid_argument("cohort has no group tags");

  const std::vector<ActiveModel> active = resolve_models(options);
  RngStream split_rng(options.master_seed, "split", 0);
  const DatasetSplit split = split_dataset(cohort.features.values.rows(),
                                           options.split_ratios, split_rng);

  ExperimentReport report;
  report.experiment = "group_holdout";
  report.master_seed = options.master_seed;
  RowBuilder builder;

  for (const std::string& tag : tags) {
    std::vector<char> in_group(
        static_cast<std::size_t>(cohort.features.values.rows()), 0);
    std::vector<int> ood_rows;
    for (std::size_t i = 0; i < cohort.row_groups.size(); ++i) {
      const std::vector<std::string>& groups = cohort.row_groups[i];
      if (std::find(groups.begin(), groups.end(), tag) != groups.end()) {
        in_group[i] = 1;
        ood_rows.push_back(static_cast<int>(i));
      }
    }
    if (ood_rows.empty()) {
      throw std::runtime_error("group " + tag + " has no rows");
    }
    const auto without_group = [&](const std::vector<int>& rows) {
      std::vector<int> kept;
      for (int r : rows) {
        if (!in_group[static_cast<std::size_t>(r)]) kept.push_back(r);
      }
      return kept;
    };
    const std::vector<int> train_rows = without_group(split.train);
    const std::vector<int> val_rows = without_group(split.validation);
    const std::vector<int> test_rows = without_group(split.test);
    if (train_rows.size() < 2 || val_rows.empty() || test_rows.empty()) {
      throw std::runtime_error("removing group " + tag +
                               " leaves too few rows to train on");
    }
    const std::vector<int> y_train = take_labels(cohort.labels, train_rows);
    if (!has_both_classes(y_train)) {
      throw std::runtime_error("removing group " + tag +
                               " empties a training class");
    }

    const ScalerStats scaler = fit_scaler(cohort.features, train_rows);
    const FeatureMatrix scaled = apply_scaler(scaler, cohort.features);
    const Matrix x_train = take_rows(scaled.values, train_rows);
    const Matrix x_val = take_rows(scaled.values, val_rows);
    const Matrix x_test = take_rows(scaled.values, test_rows);
    const Matrix x_ood = take_rows(scaled.values, ood_rows);
    const std::vector<int> y_val = take_labels(cohort.labels, val_rows);
    const std::vector<int> y_ood = take_labels(cohort.labels, ood_rows);

    GroupSummary summary;
    summary.tag = tag;
    summary.n_rows = static_cast<int>(ood_rows.size());
    summary.relative_size = static_cast<double>(ood_rows.size()) /
                            static_cast<double>(train_rows.size());
    summary.significant_feature_fraction =
        significant_fraction(x_test, x_ood, 0.01);
    report.groups.push_back(summary);

    const bool group_has_both = has_both_classes(y_ood);
    for (int run = 0; run < options.n_runs; ++run) {
      for (std::size_t m = 0; m < active.size(); ++m) {
        const std::string& name = active[m].spec->name;
        RngStream train_rng(options.master_seed,
                            "holdout/" + tag + "/train/" + name, run);
        const TrainedModel model =
            train_model(*active[m].spec, active[m].hp, x_train, y_train, x_val,
                        y_val, train_rng);
        const auto score_rng = [&] {
          return RngStream(options.master_seed,
                           "holdout/" + tag + "/score/" + name, run);
        };
        const std::vector<UncertaintyScores> id_scores = score_model(
            options, active[m], model, x_test, false, score_rng());
        const std::vector<UncertaintyScores> ood_scores = score_model(
            options, active[m], model, x_ood, true, score_rng());
        record_ood_rows(builder, name, tag, id_scores, ood_scores);
        if (active[m].spec->is_classifier && group_has_both) {
          builder.record(name, "mortality_auc", tag,
                         auc_roc(predict_mean_proba(model, x_ood), y_ood));
        }
      }
    }
  }

  report.config = base_config(options, active);
  report.config["groups"] = tags;
  report.rows = builder.finish();
  return report;
}

ExperimentReport cross_dataset_experiment(const Cohort& source_a,
                                          const std::string& name_a,
                                          const Cohort& source_b,
                                          const std::string& name_b,
                                          const ExperimentOptions& options) {
  check_cohort(source_a);
  check_cohort(source_b);
  if (options.n_runs < 1) {
    throw std::invalid_argument("n_runs must be positive");
  }
  if (source_a.features.column_names != source_b.features.column_names) {
    throw std::runtime_error("feature schemas of " + name_a + " and " +
                             name_b + " differ");
  }
  const std::vector<ActiveModel> active = resolve_models(options);

  ExperimentReport report;
  report.experiment = "cross_dataset";
  report.master_seed = options.master_seed;
  RowBuilder builder;

  struct Direction {
    const Cohort* source;
    const Cohort* target;
    std::string label;
  };
  const Direction directions[2] = {
      {&source_a, &source_b, name_a + "->" + name_b},
      {&source_b, &source_a, name_b + "->" + name_a},
  };

  for (int d = 0; d < 2; ++d) {
    const Direction& direction = directions[d];
    RngStream split_rng(options.master_seed, "crossdata/split", d);
    const DatasetSplit split =
        split_dataset(direction.source->features.values.rows(),
                      options.split_ratios, split_rng);
    const ScalerStats scaler =
        fit_scaler(direction.source->features, split.train);
    const FeatureMatrix scaled_source =
        apply_scaler(scaler, direction.source->features);
    const FeatureMatrix scaled_target =
        apply_scaler(scaler, direction.target->features);
    const Matrix x_train = take_rows(scaled_source.values, split.train);
    const Matrix x_val = take_rows(scaled_source.values, split.validation);
    const Matrix x_test = take_rows(scaled_source.values, split.test);
    const std::vector<int> y_train =
        take_labels(direction.source->labels, split.train);
    const std::vector<int> y_val =
        take_labels(direction.source->labels, split.validation);

    for (int run = 0; run < options.n_runs; ++run) {
      for (std::size_t m = 0; m < active.size(); ++m) {
        const std::string& name = active[m].spec->name;
        RngStream train_rng(options.master_seed,
                            "crossdata/" + direction.label + "/train/" + name,
                            run);
        const TrainedModel model = train_model(*active[m].spec, active[m].hp,
                                               x_train, y_train, x_val, y_val,
                                               train_rng);
        const auto score_rng = [&] {
          return RngStream(options.master_seed,
                           "crossdata/" + direction.label + "/score/" + name,
                           run);
        };
        const std::vector<UncertaintyScores> id_scores = score_model(
            options, active[m], model, x_test, false, score_rng());
        const std::vector<UncertaintyScores> ood_scores =
            score_model(options, active[m], model, scaled_target.values, true,
                        score_rng());
        record_ood_rows(builder, name, direction.label, id_scores, ood_scores);
        if (active[m].spec->is_classifier) {
          builder.record(
              name, "mortality_auc", direction.label,
              auc_roc(predict_mean_proba(model, scaled_target.values),
                      direction.target->labels));
        }
      }
    }
  }

  report.config = base_config(options, active);
  report.config["datasets"] = {name_a, name_b};
  report.rows = builder.finish();
  return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
  ordered_json groups = ordered_json::array();
  for (const GroupSummary& group : report.groups) {
    groups.push_back(ordered_json{
        {"tag", group.tag},
        {"n_rows", group.n_rows},
        {"relative_size", group.relative_size},
        {"significant_feature_fraction", group.significant_feature_fraction}});
  }
  ordered_json results = ordered_json::array();
  for (const ResultRow& row : report.rows) {
    ordered_json entry;
    entry["model"] = row.model;
    entry["metric"] = row.metric;
    entry["group_or_factor"] = row.group_or_factor;
    entry["mean"] = row.mean;
    if (row.has_std) {
      entry["std"] = row.stdev;
    } else {
      entry["std"] = nullptr;
    }
    entry["n"] = row.n;
    results.push_back(std::move(entry));
  }
  return ordered_json{{"experiment", report.experiment},
                      {"master_seed", report.master_seed},
                      {"config", report.config},
                      {"groups", std::move(groups)},
                      {"results", std::move(results)}};
}

ExperimentReport report_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) {
    throw std::runtime_error("report JSON must be an object");
  }
  ExperimentReport report;
  report.experiment = doc.at("experiment").get<std::string>();
  report.master_seed = doc.at("master_seed").get<std::uint64_t>();
  report.config = doc.value("config", ordered_json::object());
  for (const auto& group : doc.value("groups", ordered_json::array())) {
    GroupSummary summary;
    summary.tag = group.at("tag").get<std::string>();
    summary.n_rows = group.at("n_rows").get<int>();
    summary.relative_size = group.at("relative_size").get<double>();
    summary.significant_feature_fraction =
        group.at("significant_feature_fraction").get<double>();
    report.groups.push_back(std::move(summary));
  }
  for (const auto& entry : doc.at("results")) {
    ResultRow row;
    row.model = entry.at("model").get<std::string>();
    row.metric = entry.at("metric").get<std::string>();
    row.group_or_factor = entry.at("group_or_factor").get<std::string>();
    row.mean = entry.at("mean").get<double>();
    if (!entry.at("std").is_null()) {
      row.stdev = entry.at("std").get<double>();
      row.has_std = true;
    }
    row.n = entry.at("n").get<int>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

// RFC-4180 style quoting, only when the field needs it.
std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string csv = "experiment,model,metric,group_or_factor,mean,std,n\n";
  for (const ResultRow& row : report.rows) {
    csv += csv_field(report.experiment);
    csv += ',';
    csv += csv_field(row.model);
    csv += ',';
    csv += csv_field(row.metric);
    csv += ',';
    csv += csv_field(row.group_or_factor);
    csv += ',';
    csv += csv::format_double(row.mean);
    csv += ',';
    if (row.has_std) csv += csv::format_double(row.stdev);
    csv += ',';
    csv += std::to_string(row.n);
    csv += '\n';
  }
  return csv;
}

ReportPaths write_report(const ExperimentReport& report, const std::string& dir) {
  const std::string stem = dir + "/" + report.experiment + "_seed" +
                           std::to_string(report.master_seed);
  ReportPaths paths{stem + ".json", stem + ".csv"};
  write_text_atomic(paths.json_path, report_to_json(report).dump(2) + "\n");
  write_text_atomic(paths.csv_path, report_to_csv(report));
  return paths;
}

}  // namespace uqtab
