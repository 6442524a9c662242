#include "uqtab/episode.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "uqtab/csv.hpp"

namespace uqtab {
namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] void fail_row(const std::string& path, int line_no,
                           const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<LabelRecord> read_labels_csv(const std::string& labels_path) {
  std::ifstream labels_in(labels_path);
  if (!labels_in) {
    throw std::runtime_error("cannot open labels file: " + labels_path);
  }

  std::vector<LabelRecord> records;
  std::unordered_map<std::string, int> index_by_id;

  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(labels_in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = csv::split_fields(line);
    if (!saw_header) {
      saw_header = true;
      if (fields.size() >= 2 && fields[0] == "patient_id") continue;
      fail_row(labels_path, line_no, "expected header patient_id,label,groups");
    }
    if (fields.size() < 2 || fields.size() > 3) {
      fail_row(labels_path, line_no, "expected 2 or 3 fields, got " +
                                         std::to_string(fields.size()));
    }
    LabelRecord record;
    record.patient_id = std::string(fields[0]);
    if (record.patient_id.empty()) {
      fail_row(labels_path, line_no, "empty patient_id");
    }
    const auto label = csv::parse_int(fields[1]);
    if (!label || (*label != 0 && *label != 1)) {
      fail_row(labels_path, line_no,
               "label must be 0 or 1, got '" + std::string(fields[1]) + "'");
    }
    record.label = static_cast<int>(*label);
    if (fields.size() == 3 && !fields[2].empty()) {
      // Semicolon-joined group tags; duplicates dropped, first spelling wins.
      std::string groups_field(fields[2]);
      std::stringstream gs(groups_field);
      std::string tag;
      while (std::getline(gs, tag, ';')) {
        if (tag.empty()) continue;
        if (std::find(record.groups.begin(), record.groups.end(), tag) ==
            record.groups.end()) {
          record.groups.push_back(tag);
        }
      }
    }
    if (index_by_id.count(record.patient_id)) {
      fail_row(labels_path, line_no,
               "duplicate patient_id '" + record.patient_id + "'");
    }
    index_by_id[record.patient_id] = static_cast<int>(records.size());
    records.push_back(std::move(record));
  }
  if (!saw_header) {
    throw std::runtime_error(labels_path + ": empty labels file");
  }
  return records;
}

std::vector<Episode> load_episodes(const std::string& timeseries_path,
                                   const std::string& labels_path,
                                   LoadStats* stats) {
  LoadStats local;
  if (!stats) stats = &local;
  *stats = LoadStats{};

  std::vector<Episode> episodes;
  std::unordered_map<std::string, int> index_by_id;
  for (LabelRecord& record : read_labels_csv(labels_path)) {
    Episode ep;
    ep.patient_id = std::move(record.patient_id);
    ep.label = record.label;
    ep.groups = std::move(record.groups);
    index_by_id[ep.patient_id] = static_cast<int>(episodes.size());
    episodes.push_back(std::move(ep));
  }

  std::string line;
  int line_no = 0;
  bool saw_header = false;

  std::ifstream ts_in(timeseries_path);
  if (!ts_in) {
    throw std::runtime_error("cannot open time series file: " + timeseries_path);
  }

  line_no = 0;
  saw_header = false;
  while (std::getline(ts_in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = csv::split_fields(line);
    if (!saw_header) {
      saw_header = true;
      if (fields.size() == 4 && fields[0] == "patient_id") continue;
      fail_row(timeseries_path, line_no,
               "expected header patient_id,variable,time_hours,value");
    }
    if (fields.size() != 4) {
      fail_row(timeseries_path, line_no,
               "expected 4 fields, got " + std::to_string(fields.size()));
    }
    std::string pid(fields[0]);
    auto it = index_by_id.find(pid);
    if (it == index_by_id.end()) {
      fail_row(timeseries_path, line_no,
               "patient_id '" + pid + "' not present in labels file");
    }
    if (fields[1].empty()) fail_row(timeseries_path, line_no, "empty variable id");
    if (fields[3].empty()) {
      // Missing measurement value (e.g. exported null); skip the row.
      ++stats->empty_value_rows;
      continue;
    }
    const auto t = csv::parse_double(fields[2]);
    if (!t) {
      fail_row(timeseries_path, line_no,
               "bad time_hours '" + std::string(fields[2]) + "'");
    }
    const auto v = csv::parse_double(fields[3]);
    if (!v) {
      fail_row(timeseries_path, line_no,
               "bad value '" + std::string(fields[3]) + "'");
    }
    if (!(*t >= 0.0 && *t <= 48.0)) {
      ++stats->out_of_window_rows;
      continue;
    }
    episodes[it->second].series[std::string(fields[1])].push_back({*t, *v});
  }
  if (!saw_header) {
    throw std::runtime_error(timeseries_path + ": empty time series file");
  }

  for (auto& ep : episodes) {
    int kept = 0;
    for (auto& [var, ms] : ep.series) {
      // Stable: simultaneous measurements stay in file order.
      std::stable_sort(ms.begin(), ms.end(),
                       [](const Measurement& a, const Measurement& b) {
                         return a.time_hours < b.time_hours;
                       });
      kept += static_cast<int>(ms.size());
    }
    if (kept == 0) {
      throw std::runtime_error("patient '" + ep.patient_id +
                               "' has no measurements inside [0, 48] hours");
    }
  }
  return episodes;
}

void write_cohort_csv(const std::vector<Episode>& episodes,
                      const std::string& timeseries_path,
                      const std::string& labels_path) {
  std::ofstream ts_out(timeseries_path);
  if (!ts_out) {
    throw std::runtime_error("cannot write time series file: " + timeseries_path);
  }
  ts_out << "patient_id,variable,time_hours,value\n";
  for (const auto& ep : episodes) {
    for (const auto& [var, ms] : ep.series) {
      for (const auto& m : ms) {
        ts_out << ep.patient_id << ',' << var << ','
               << csv::format_double(m.time_hours) << ','
               << csv::format_double(m.value) << '\n';
      }
    }
  }
  if (!ts_out.flush()) {
    throw std::runtime_error("write failed: " + timeseries_path);
  }

  std::ofstream lb_out(labels_path);
  if (!lb_out) {
    throw std::runtime_error("cannot write labels file: " + labels_path);
  }
  lb_out << "patient_id,label,groups\n";
  for (const auto& ep : episodes) {
    lb_out << ep.patient_id << ',' << ep.label << ',';
    for (size_t i = 0; i < ep.groups.size(); ++i) {
      if (i) lb_out << ';';
      lb_out << ep.groups[i];
    }
    lb_out << '\n';
  }
  if (!lb_out.flush()) {
    throw std::runtime_error("write failed: " + labels_path);
  }
}

std::vector<std::string> collect_variables(const std::vector<Episode>& episodes) {
  std::set<std::string> vars;
  for (const auto& ep : episodes) {
    for (const auto& [var, ms] : ep.series) {
      (void)ms;
      vars.insert(var);
    }
  }
  return {vars.begin(), vars.end()};
}

}  // namespace uqtab
