// Command-line front end: cohort synthesis, feature engineering, model
// tuning/training, and the three out-of-distribution experiments, all
// driven by one master seed so every invocation is reproducible.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uqtab/csv.hpp"
#include "uqtab/episode.hpp"
#include "uqtab/experiments.hpp"
#include "uqtab/features.hpp"
#include "uqtab/kernels.hpp"
#include "uqtab/model.hpp"
#include "uqtab/rng.hpp"
#include "uqtab/runconfig.hpp"
#include "uqtab/search.hpp"
#include "uqtab/synthetic.hpp"

namespace {

using nlohmann::ordered_json;
using namespace uqtab;

// Bad invocations (as opposed to failures while doing the work) exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --config must be honored before the per-flag defaults are fixed, so the
// path is pulled out of argv ahead of the real parse.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 >= argc) throw UsageError("--config needs a file path");
      return argv[i + 1];
    }
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

// Flag and config-file values layered over the built-in defaults; the seed
// additionally falls back to the UQTAB_SEED environment variable.
RunConfig resolve_defaults(const ordered_json& config) {
  RunConfig rc;
  rc.seed = config_u64(config, "seed", env_seed(0));
  rc.jobs = config_int(config, "jobs", rc.jobs);
  rc.out_dir = config_string(config, "out_dir", rc.out_dir);
  rc.timeseries = config_string(config, "timeseries", rc.timeseries);
  rc.labels = config_string(config, "labels", rc.labels);
  rc.features = config_string(config, "features", rc.features);
  rc.timeseries_b = config_string(config, "timeseries_b", rc.timeseries_b);
  rc.labels_b = config_string(config, "labels_b", rc.labels_b);
  rc.name_a = config_string(config, "name_a", rc.name_a);
  rc.name_b = config_string(config, "name_b", rc.name_b);
  rc.n_patients = config_int(config, "n_patients", rc.n_patients);
  rc.n_variables = config_int(config, "n_variables", rc.n_variables);
  rc.mortality_rate = config_double(config, "mortality_rate", rc.mortality_rate);
  rc.label_sharpness = config_double(config, "label_sharpness", rc.label_sharpness);
  rc.patient_sd = config_double(config, "patient_sd", rc.patient_sd);
  rc.noise_sd = config_double(config, "noise_sd", rc.noise_sd);
  rc.ar_coeff = config_double(config, "ar_coeff", rc.ar_coeff);
  rc.min_obs = config_int(config, "min_obs", rc.min_obs);
  rc.max_obs = config_int(config, "max_obs", rc.max_obs);
  rc.groups_spec = config_string(config, "groups_spec", rc.groups_spec);
  rc.model = config_string(config, "model", rc.model);
  rc.models = config_string_list(config, "models", rc.models);
  rc.tuned = config_string_list(config, "tuned", rc.tuned);
  rc.budget = config_int(config, "budget", rc.budget);
  rc.n_runs = config_int(config, "n_runs", rc.n_runs);
  rc.factors = config_double_list(config, "factors", rc.factors);
  rc.repeats = config_int(config, "repeats", rc.repeats);
  rc.groups = config_string_list(config, "groups", rc.groups);
  rc.inputs = config_string_list(config, "inputs", rc.inputs);
  return rc;
}

// "tag:prevalence:shift,..." for the synthetic cohort's subgroups.
std::vector<GroupSpec> parse_group_specs(const std::string& text) {
  std::vector<GroupSpec> groups;
  for (const std::string& part : parse_string_list(text)) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = part.find(':', start);
      if (pos == std::string::npos) {
        fields.push_back(part.substr(start));
        break;
      }
      fields.push_back(part.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != 3 || fields[0].empty()) {
      throw UsageError("bad group spec '" + part + "' (want tag:prevalence:shift)");
    }
    const auto prevalence = csv::parse_double(fields[1]);
    const auto shift = csv::parse_double(fields[2]);
    if (!prevalence || !shift) {
      throw UsageError("bad group spec '" + part + "' (want tag:prevalence:shift)");
    }
    groups.push_back(GroupSpec{fields[0], *prevalence, *shift});
  }
  return groups;
}

std::vector<std::pair<std::string, Hyperparams>> load_tuned_overrides(
    const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, Hyperparams>> overrides;
  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    ordered_json doc;
    try {
      doc = ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    overrides.emplace_back(doc.at("model").get<std::string>(),
                           hyperparams_from_json(doc.at("best")));
  }
  return overrides;
}

ExperimentOptions options_from(const RunConfig& rc) {
  ExperimentOptions options;
  options.master_seed = rc.seed;
  options.n_runs = rc.n_runs;
  options.models = rc.models;
  options.overrides = load_tuned_overrides(rc.tuned);
  return options;
}

// Train/validation rows on the same "split" stream the experiments use, so
// a tuned configuration is evaluated on the split it will later run under.
struct PreparedSplit {
  ScalerStats scaler;
  Matrix x_train;
  Matrix x_val;
  std::vector<int> y_train;
  std::vector<int> y_val;
};

PreparedSplit prepare_train_val(const Cohort& cohort, std::uint64_t seed) {
  const double ratios[3] = {0.70, 0.15, 0.15};
  RngStream split_rng(seed, "split", 0);
  const DatasetSplit split = split_dataset(
      static_cast<int>(cohort.features.values.rows()), ratios, split_rng);
  PreparedSplit prepared;
  prepared.scaler = fit_scaler(cohort.features, split.train);
  const FeatureMatrix scaled = apply_scaler(prepared.scaler, cohort.features);
  prepared.x_train = take_rows(scaled.values, split.train);
  prepared.x_val = take_rows(scaled.values, split.validation);
  prepared.y_train = take_labels(cohort.labels, split.train);
  prepared.y_val = take_labels(cohort.labels, split.validation);
  return prepared;
}

void require_flag(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError("missing required " + flag);
}

void print_report(const ExperimentReport& report, const ReportPaths& paths) {
  for (const ResultRow& row : report.rows) {
    std::cout << row.model << " " << row.metric;
    if (!row.group_or_factor.empty()) std::cout << " [" << row.group_or_factor << "]";
    std::cout << ": " << csv::format_double(row.mean);
    if (row.has_std) std::cout << " +- " << csv::format_double(row.stdev);
    std::cout << " (n=" << row.n << ")\n";
  }
  std::cout << "wrote " << paths.json_path << " and " << paths.csv_path << "\n";
}

int cmd_synth(const RunConfig& rc) {
  SyntheticCohortConfig config;
  config.n_patients = rc.n_patients;
  config.n_variables = rc.n_variables;
  config.mortality_rate = rc.mortality_rate;
  config.label_sharpness = rc.label_sharpness;
  config.patient_sd = rc.patient_sd;
  config.noise_sd = rc.noise_sd;
  config.ar_coeff = rc.ar_coeff;
  config.min_obs = rc.min_obs;
  config.max_obs = rc.max_obs;
  config.groups = parse_group_specs(rc.groups_spec);
  config.seed = rc.seed;
  const std::vector<Episode> episodes = generate_synthetic_cohort(config);
  std::filesystem::create_directories(rc.out_dir);
  const std::string timeseries_path = rc.out_dir + "/timeseries.csv";
  const std::string labels_path = rc.out_dir + "/labels.csv";
  write_cohort_csv(episodes, timeseries_path, labels_path);
  std::cout << "wrote " << episodes.size() << " episodes to " << timeseries_path
            << " and " << labels_path << "\n";
  return 0;
}

int cmd_featurize(const RunConfig& rc) {
  require_flag(rc.timeseries, "--timeseries");
  require_flag(rc.labels, "--labels");
  LoadStats stats;
  const std::vector<Episode> episodes =
      load_episodes(rc.timeseries, rc.labels, &stats);
  if (stats.out_of_window_rows > 0) {
    std::cerr << "note: dropped " << stats.out_of_window_rows
              << " rows outside the 48h window\n";
  }
  const FeatureMatrix features =
      engineer_features(episodes, collect_variables(episodes));
  std::filesystem::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/features.csv";
  write_features_csv(features, path);
  std::cout << "wrote " << features.values.rows() << " x "
            << features.values.cols() << " features to " << path << "\n";
  return 0;
}

int cmd_tune(const RunConfig& rc) {
  require_flag(rc.model, "--model");
  require_flag(rc.features, "--features");
  require_flag(rc.labels, "--labels");
  find_model_spec(rc.model);  // unknown names fail before the search check
  if (!is_searchable_model(rc.model)) {
    throw std::runtime_error("model '" + rc.model +
                             "' has no search space; tune NN and reuse its "
                             "configuration");
  }
  const Cohort cohort = load_cohort(rc.features, rc.labels);
  const PreparedSplit prepared = prepare_train_val(cohort, rc.seed);
  const int budget = rc.budget > 0 ? rc.budget : default_search_budget(rc.model);
  const SearchResult result =
      random_search(rc.model, budget, prepared.x_train, prepared.y_train,
                    prepared.x_val, prepared.y_val, rc.seed);
  std::filesystem::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/tune_" + rc.model + ".json";
  write_text_atomic(path, search_result_to_json(result).dump(2) + "\n");
  std::cout << "best trial " << result.best_trial << " (val loss "
            << csv::format_double(result.best_val_loss) << ") -> " << path << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc) {
  require_flag(rc.model, "--model");
  require_flag(rc.features, "--features");
  require_flag(rc.labels, "--labels");
  const ModelSpec& spec = find_model_spec(rc.model);
  const Cohort cohort = load_cohort(rc.features, rc.labels);
  const PreparedSplit prepared = prepare_train_val(cohort, rc.seed);
  Hyperparams hp = spec.defaults;
  for (const auto& [name, tuned_hp] : load_tuned_overrides(rc.tuned)) {
    if (name == spec.name) hp = tuned_hp;
  }
  RngStream train_rng(rc.seed, "train/" + spec.name, 0);
  const TrainedModel model =
      train_model(spec, hp, prepared.x_train, prepared.y_train, prepared.x_val,
                  prepared.y_val, train_rng);
  std::filesystem::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/" + spec.name + ".uqtab";
  save_model(model, hp, &prepared.scaler, rc.seed, path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  require_flag(rc.features, "--features");
  require_flag(rc.labels, "--labels");
  const Cohort cohort = load_cohort(rc.features, rc.labels);
  const ExperimentReport report = evaluate_mortality(cohort, options_from(rc));
  std::filesystem::create_directories(rc.out_dir);
  print_report(report, write_report(report, rc.out_dir));
  return 0;
}

int cmd_perturb(const RunConfig& rc) {
  require_flag(rc.features, "--features");
  require_flag(rc.labels, "--labels");
  const Cohort cohort = load_cohort(rc.features, rc.labels);
  const ExperimentReport report =
      perturbation_experiment(cohort, rc.factors, rc.repeats, options_from(rc));
  std::filesystem::create_directories(rc.out_dir);
  print_report(report, write_report(report, rc.out_dir));
  return 0;
}

int cmd_holdout(const RunConfig& rc) {
  require_flag(rc.features, "--features");
  require_flag(rc.labels, "--labels");
  const Cohort cohort = load_cohort(rc.features, rc.labels);
  const ExperimentReport report =
      group_holdout_experiment(cohort, rc.groups, options_from(rc));
  std::filesystem::create_directories(rc.out_dir);
  print_report(report, write_report(report, rc.out_dir));
  return 0;
}

int cmd_crossdata(const RunConfig& rc) {
  require_flag(rc.timeseries, "--timeseries");
  require_flag(rc.labels, "--labels");
  require_flag(rc.timeseries_b, "--timeseries-b");
  require_flag(rc.labels_b, "--labels-b");
  const Cohort cohort_a =
      cohort_from_episodes(load_episodes(rc.timeseries, rc.labels));
  const Cohort cohort_b =
      cohort_from_episodes(load_episodes(rc.timeseries_b, rc.labels_b));
  const ExperimentReport report = cross_dataset_experiment(
      cohort_a, rc.name_a, cohort_b, rc.name_b, options_from(rc));
  std::filesystem::create_directories(rc.out_dir);
  print_report(report, write_report(report, rc.out_dir));
  return 0;
}

int cmd_report(const RunConfig& rc) {
  if (rc.inputs.empty()) {
    throw UsageError("report needs at least one input JSON file");
  }
  std::string merged = "experiment,model,metric,group_or_factor,mean,std,n\n";
  int n_rows = 0;
  for (const std::string& path : rc.inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    ordered_json doc;
    try {
      doc = ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    const ExperimentReport report = report_from_json(doc);
    const std::string csv = report_to_csv(report);
    merged += csv.substr(csv.find('\n') + 1);  // drop the per-file header
    n_rows += static_cast<int>(report.rows.size());
  }
  std::filesystem::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/merged_report.csv";
  write_text_atomic(path, merged);
  std::cout << "wrote " << n_rows << " rows to " << path << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  const std::string config_path = prescan_config_path(argc, argv);
  ordered_json config = ordered_json::object();
  if (!config_path.empty()) config = load_flat_config(config_path);
  RunConfig rc = resolve_defaults(config);
  std::string config_flag;  // consumed by the prescan; bound here for --help

  CLI::App app{"Uncertainty benchmarking for tabular clinical cohorts"};
  app.require_subcommand(1);
  app.add_option("--config", config_flag, "flat JSON config file (flags win)");

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", rc.seed,
                    "master RNG seed (flag > config > UQTAB_SEED > 0)")
        ->capture_default_str();
    sub->add_option("--jobs", rc.jobs, "worker thread cap for parallel kernels")
        ->capture_default_str();
    sub->add_option("--out", rc.out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--config", config_flag, "flat JSON config file (flags win)");
  };

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic cohort (timeseries.csv + labels.csv)");
  add_common(synth);
  synth->add_option("--patients", rc.n_patients, "cohort size")
      ->capture_default_str();
  synth->add_option("--variables", rc.n_variables, "vital-sign series per patient")
      ->capture_default_str();
  synth->add_option("--mortality-rate", rc.mortality_rate,
                    "target label prevalence")
      ->capture_default_str();
  synth->add_option("--label-sharpness", rc.label_sharpness,
                    "risk-score multiplier in the label link")
      ->capture_default_str();
  synth->add_option("--patient-sd", rc.patient_sd,
                    "spread of per-patient latent means")
      ->capture_default_str();
  synth->add_option("--noise-sd", rc.noise_sd, "within-series noise level")
      ->capture_default_str();
  synth->add_option("--ar-coeff", rc.ar_coeff, "series autocorrelation in [0,1)")
      ->capture_default_str();
  synth->add_option("--min-obs", rc.min_obs, "min measurements per series")
      ->capture_default_str();
  synth->add_option("--max-obs", rc.max_obs, "max measurements per series")
      ->capture_default_str();
  synth->add_option("--groups", rc.groups_spec,
                    "subgroups as tag:prevalence:shift,...");

  CLI::App* featurize = app.add_subcommand(
      "featurize", "summarize a cohort into window-statistic features");
  add_common(featurize);
  featurize->add_option("--timeseries", rc.timeseries, "time series CSV");
  featurize->add_option("--labels", rc.labels, "labels CSV");

  CLI::App* tune = app.add_subcommand(
      "tune", "random-search model hyperparameters on the validation split");
  add_common(tune);
  tune->add_option("--features", rc.features, "engineered features CSV");
  tune->add_option("--labels", rc.labels, "labels CSV");
  tune->add_option("--model", rc.model, "model family to search");
  tune->add_option("--budget", rc.budget,
                   "number of trials (0 = the family's default)")
      ->capture_default_str();

  CLI::App* train = app.add_subcommand(
      "train", "train one model and save it with its feature scaler");
  add_common(train);
  train->add_option("--features", rc.features, "engineered features CSV");
  train->add_option("--labels", rc.labels, "labels CSV");
  train->add_option("--model", rc.model, "model to train");
  train->add_option("--tuned", rc.tuned, "tune output JSON files to apply")
      ->delimiter(',');

  CLI::App* eval = app.add_subcommand(
      "eval", "mortality AUC per classifier, mean +- std over retrainings");
  add_common(eval);
  eval->add_option("--features", rc.features, "engineered features CSV");
  eval->add_option("--labels", rc.labels, "labels CSV");
  eval->add_option("--models", rc.models, "model roster filter")->delimiter(',');
  eval->add_option("--tuned", rc.tuned, "tune output JSON files to apply")
      ->delimiter(',');
  eval->add_option("--runs", rc.n_runs, "independent retrainings")
      ->capture_default_str();

  CLI::App* perturb = app.add_subcommand(
      "perturb", "score original vs single-feature-scaled test rows");
  add_common(perturb);
  perturb->add_option("--features", rc.features, "engineered features CSV");
  perturb->add_option("--labels", rc.labels, "labels CSV");
  perturb->add_option("--models", rc.models, "model roster filter")
      ->delimiter(',');
  perturb->add_option("--tuned", rc.tuned, "tune output JSON files to apply")
      ->delimiter(',');
  perturb->add_option("--factors", rc.factors, "scaling factors")
      ->delimiter(',');
  perturb->add_option("--repeats", rc.repeats, "perturbed columns per factor")
      ->capture_default_str();

  CLI::App* holdout = app.add_subcommand(
      "holdout", "hold each tagged group out of training and score it as OOD");
  add_common(holdout);
  holdout->add_option("--features", rc.features, "engineered features CSV");
  holdout->add_option("--labels", rc.labels, "labels CSV");
  holdout->add_option("--models", rc.models, "model roster filter")
      ->delimiter(',');
  holdout->add_option("--tuned", rc.tuned, "tune output JSON files to apply")
      ->delimiter(',');
  holdout->add_option("--groups", rc.groups, "group tags (default: all present)")
      ->delimiter(',');
  holdout->add_option("--runs", rc.n_runs, "independent retrainings")
      ->capture_default_str();

  CLI::App* crossdata = app.add_subcommand(
      "crossdata", "train on each cohort and score the other as OOD");
  add_common(crossdata);
  crossdata->add_option("--timeseries", rc.timeseries, "cohort A time series CSV");
  crossdata->add_option("--labels", rc.labels, "cohort A labels CSV");
  crossdata->add_option("--timeseries-b", rc.timeseries_b,
                        "cohort B time series CSV");
  crossdata->add_option("--labels-b", rc.labels_b, "cohort B labels CSV");
  crossdata->add_option("--name-a", rc.name_a, "cohort A display name")
      ->capture_default_str();
  crossdata->add_option("--name-b", rc.name_b, "cohort B display name")
      ->capture_default_str();
  crossdata->add_option("--models", rc.models, "model roster filter")
      ->delimiter(',');
  crossdata->add_option("--tuned", rc.tuned, "tune output JSON files to apply")
      ->delimiter(',');
  crossdata->add_option("--runs", rc.n_runs, "independent retrainings")
      ->capture_default_str();

  CLI::App* report = app.add_subcommand(
      "report", "merge experiment report JSON files into one CSV");
  add_common(report);
  report->add_option("inputs", rc.inputs, "report JSON files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (rc.jobs < 1) throw UsageError("--jobs must be at least 1");
  kernels::set_max_threads(rc.jobs);

  if (synth->parsed()) return cmd_synth(rc);
  if (featurize->parsed()) return cmd_featurize(rc);
  if (tune->parsed()) return cmd_tune(rc);
  if (train->parsed()) return cmd_train(rc);
  if (eval->parsed()) return cmd_eval(rc);
  if (perturb->parsed()) return cmd_perturb(rc);
  if (holdout->parsed()) return cmd_holdout(rc);
  if (crossdata->parsed()) return cmd_crossdata(rc);
  if (report->parsed()) return cmd_report(rc);
  throw std::logic_error("unreachable: no subcommand dispatched");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
