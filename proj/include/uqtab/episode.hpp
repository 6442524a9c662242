#pragma once

#include <map>
#include <string>
#include <vector>

namespace uqtab {

struct Measurement {
  double time_hours;  // in [0, 48]
  double value;
};

// One ICU stay: per-variable time series over the first 48 hours, a binary
// outcome label, and free-form group tags used by the holdout experiments.
struct Episode {
  std::string patient_id;
  int label = 0;  // {0, 1}
  std::vector<std::string> groups;
  std::map<std::string, std::vector<Measurement>> series;  // sorted by time
};

struct LoadStats {
  int out_of_window_rows = 0;  // time outside [0, 48]; dropped with a warning
  int empty_value_rows = 0;    // empty value field; skipped silently
};

// One row of the labels CSV.
struct LabelRecord {
  std::string patient_id;
  int label = 0;
  std::vector<std::string> groups;
};

// Reads `patient_id,label,groups` rows in file order; patient ids must be
// unique, labels must be 0/1, groups are semicolon-joined tags.
std::vector<LabelRecord> read_labels_csv(const std::string& labels_path);

// Reads the two-file cohort format:
//   time series CSV: patient_id,variable,time_hours,value
//   labels CSV:      patient_id,label,groups   (groups semicolon-joined)
// One Episode per labels row, in labels-file order. Duplicate
// (patient, variable, time) rows are both kept, in arrival order.
std::vector<Episode> load_episodes(const std::string& timeseries_path,
                                   const std::string& labels_path,
                                   LoadStats* stats = nullptr);

// Writes a cohort back out in the same two-file format.
void write_cohort_csv(const std::vector<Episode>& episodes,
                      const std::string& timeseries_path,
                      const std::string& labels_path);

// Sorted distinct variable ids across the cohort.
std::vector<std::string> collect_variables(const std::vector<Episode>& episodes);

}  // namespace uqtab
