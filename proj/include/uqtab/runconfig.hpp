#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace uqtab {

// Everything a CLI invocation resolves to. Values are filled in priority
// order: command-line flags, then --config file entries, then (for the
// seed) the UQTAB_SEED environment variable, then these defaults.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = ".";

  // Data paths.
  std::string timeseries;
  std::string labels;
  std::string features;
  std::string timeseries_b;
  std::string labels_b;
  std::string name_a = "a";
  std::string name_b = "b";

  // Synthetic cohort parameters.
  int n_patients = 1000;
  int n_variables = 14;
  double mortality_rate = 0.13;
  double label_sharpness = 2.0;
  double patient_sd = 1.0;
  double noise_sd = 0.25;
  double ar_coeff = 0.8;
  int min_obs = 8;
  int max_obs = 24;
  std::string groups_spec;  // "tag:prevalence:shift,..."

  // Model selection and experiment parameters.
  std::string model;                 // tune / train
  std::vector<std::string> models;   // experiment roster filter
  std::vector<std::string> tuned;    // tune-output JSON files to apply
  int budget = 0;                    // 0 = the family's default budget
  int n_runs = 5;
  std::vector<double> factors = {10.0, 100.0, 1000.0, 10000.0};
  int repeats = 100;
  std::vector<std::string> groups;   // holdout tags; empty = all present
  std::vector<std::string> inputs;   // report: JSON files to merge
};

// The config file format: one flat JSON object whose keys mirror RunConfig
// field names, scalar or array-of-scalar valued.
nlohmann::ordered_json load_flat_config(const std::string& path);

// RunConfig round-trip into that same flat format.
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

// Typed lookups with defaults; a present key of the wrong shape throws.
std::uint64_t config_u64(const nlohmann::ordered_json& config,
                         const std::string& key, std::uint64_t fallback);
int config_int(const nlohmann::ordered_json& config, const std::string& key,
               int fallback);
double config_double(const nlohmann::ordered_json& config,
                     const std::string& key, double fallback);
std::string config_string(const nlohmann::ordered_json& config,
                          const std::string& key, std::string fallback);
std::vector<double> config_double_list(const nlohmann::ordered_json& config,
                                       const std::string& key,
                                       std::vector<double> fallback);
std::vector<std::string> config_string_list(
    const nlohmann::ordered_json& config, const std::string& key,
    std::vector<std::string> fallback);

// Comma-separated flag values ("10,100,1000" / "NN,PPCA").
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::string> parse_string_list(const std::string& text);

// UQTAB_SEED environment fallback; unset returns `fallback`, a set but
// non-numeric value throws.
std::uint64_t env_seed(std::uint64_t fallback);

}  // namespace uqtab
