// Data layer: cohort CSV round-trips, the synthetic generator's contracts,
// feature engineering against hand-computed statistics, scaling/splitting/
// perturbation properties, and the flat run-configuration format.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "uqtab/csv.hpp"
#include "uqtab/episode.hpp"
#include "uqtab/features.hpp"
#include "uqtab/rng.hpp"
#include "uqtab/runconfig.hpp"
#include "uqtab/synthetic.hpp"

using namespace uqtab;
using nlohmann::ordered_json;

namespace {

// Per-test scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("uqtab_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

bool bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool episodes_equal(const std::vector<Episode>& a, const std::vector<Episode>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].patient_id != b[i].patient_id || a[i].label != b[i].label ||
        a[i].groups != b[i].groups || a[i].series.size() != b[i].series.size()) {
      return false;
    }
    for (const auto& [var, ms] : a[i].series) {
      auto it = b[i].series.find(var);
      if (it == b[i].series.end() || it->second.size() != ms.size()) return false;
      for (std::size_t k = 0; k < ms.size(); ++k) {
        if (std::memcmp(&ms[k].time_hours, &it->second[k].time_hours,
                        sizeof(double)) != 0 ||
            std::memcmp(&ms[k].value, &it->second[k].value, sizeof(double)) != 0) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Episode CSV round trips and error reporting
// ---------------------------------------------------------------------------

TEST_SUITE("episodes") {
  TEST_CASE("cohort CSV round-trips bit for bit") {
    SyntheticCohortConfig config;
    config.n_patients = 25;
    config.n_variables = 3;
    config.seed = 77;
    config.groups = {{"elder", 0.3, 1.0}};
    const std::vector<Episode> episodes = generate_synthetic_cohort(config);

    TempDir dir("episodes_rt");
    write_cohort_csv(episodes, dir.file("ts.csv"), dir.file("lab.csv"));
    const std::vector<Episode> back =
        load_episodes(dir.file("ts.csv"), dir.file("lab.csv"));
    CHECK(episodes_equal(episodes, back));
  }

  TEST_CASE("labels reader validates structure") {
    TempDir dir("labels_bad");
    write_file(dir.file("ok.csv"),
               "patient_id,label,groups\np1,0,\np2,1,old;frail;old\n");
    const auto records = read_labels_csv(dir.file("ok.csv"));
    REQUIRE(records.size() == 2);
    CHECK(records[0].groups.empty());
    CHECK(records[1].groups == std::vector<std::string>{"old", "frail"});

    write_file(dir.file("dup.csv"), "patient_id,label,groups\np1,0,\np1,1,\n");
    CHECK_THROWS_WITH_AS(read_labels_csv(dir.file("dup.csv")),
                         doctest::Contains("duplicate"), std::runtime_error);

    write_file(dir.file("badlabel.csv"), "patient_id,label,groups\np1,2,\n");
    CHECK_THROWS_WITH_AS(read_labels_csv(dir.file("badlabel.csv")),
                         doctest::Contains("label"), std::runtime_error);

    write_file(dir.file("noheader.csv"), "p1,0,\n");
    CHECK_THROWS(read_labels_csv(dir.file("noheader.csv")));
  }

  TEST_CASE("timeseries reader drops out-of-window rows and skips empty values") {
    TempDir dir("ts_filter");
    write_file(dir.file("lab.csv"), "patient_id,label,groups\np1,1,\n");
    write_file(dir.file("ts.csv"),
               "patient_id,variable,time_hours,value\n"
               "p1,hr,0.0,60\n"
               "p1,hr,49.0,61\n"   // outside the 48h axis
               "p1,hr,-0.5,62\n"   // outside the 48h axis
               "p1,hr,12.0,\n"     // empty value
               "p1,hr,48.0,63\n");
    LoadStats stats;
    const auto episodes = load_episodes(dir.file("ts.csv"), dir.file("lab.csv"), &stats);
    CHECK(stats.out_of_window_rows == 2);
    CHECK(stats.empty_value_rows == 1);
    REQUIRE(episodes.size() == 1);
    const auto& hr = episodes[0].series.at("hr");
    REQUIRE(hr.size() == 2);
    CHECK(hr[0].time_hours == 0.0);
    CHECK(hr[1].time_hours == 48.0);  // the axis end itself is in range
  }

  TEST_CASE("unknown patients and empty episodes are errors") {
    TempDir dir("ts_errors");
    write_file(dir.file("lab.csv"), "patient_id,label,groups\np1,1,\n");
    write_file(dir.file("ts.csv"),
               "patient_id,variable,time_hours,value\npX,hr,1.0,2\n");
    CHECK_THROWS_WITH_AS(load_episodes(dir.file("ts.csv"), dir.file("lab.csv")),
                         doctest::Contains("pX"), std::runtime_error);

    write_file(dir.file("empty_ts.csv"), "patient_id,variable,time_hours,value\n");
    CHECK_THROWS(load_episodes(dir.file("empty_ts.csv"), dir.file("lab.csv")));
  }

  TEST_CASE("measurements are sorted by time with arrival order preserved on ties") {
    TempDir dir("ts_sort");
    write_file(dir.file("lab.csv"), "patient_id,label,groups\np1,0,\n");
    write_file(dir.file("ts.csv"),
               "patient_id,variable,time_hours,value\n"
               "p1,hr,5.0,1\n"
               "p1,hr,1.0,2\n"
               "p1,hr,5.0,3\n");
    const auto episodes = load_episodes(dir.file("ts.csv"), dir.file("lab.csv"));
    const auto& hr = episodes[0].series.at("hr");
    REQUIRE(hr.size() == 3);
    CHECK(hr[0].value == 2.0);
    CHECK(hr[1].value == 1.0);  // stable: first 5.0 arrival stays first
    CHECK(hr[2].value == 3.0);
  }
}

// ---------------------------------------------------------------------------
// Synthetic generator contracts
// ---------------------------------------------------------------------------

TEST_SUITE("synthetic") {
  TEST_CASE("same config, same cohort") {
    SyntheticCohortConfig config;
    config.n_patients = 40;
    config.n_variables = 4;
    config.seed = 5;
    config.groups = {{"g", 0.25, 0.5}};
    CHECK(episodes_equal(generate_synthetic_cohort(config),
                         generate_synthetic_cohort(config)));
    SyntheticCohortConfig other = config;
    other.seed = 6;
    CHECK(!episodes_equal(generate_synthetic_cohort(config),
                          generate_synthetic_cohort(other)));
  }

  TEST_CASE("label rate hits the target within half a patient") {
    SyntheticCohortConfig config;
    config.n_patients = 500;
    config.n_variables = 3;
    config.seed = 9;
    for (double rate : {0.13, 0.4}) {
      config.mortality_rate = rate;
      const auto episodes = generate_synthetic_cohort(config);
      int deaths = 0;
      for (const auto& ep : episodes) deaths += ep.label;
      CHECK(std::fabs(deaths - rate * config.n_patients) <= 1.0);
    }
  }

  TEST_CASE("series respect the observation and time bounds") {
    SyntheticCohortConfig config;
    config.n_patients = 30;
    config.n_variables = 5;
    config.min_obs = 4;
    config.max_obs = 9;
    config.seed = 3;
    for (const auto& ep : generate_synthetic_cohort(config)) {
      CHECK(ep.series.size() == 5);
      for (const auto& [var, ms] : ep.series) {
        CHECK(ms.size() >= 4);
        CHECK(ms.size() <= 9);
        for (std::size_t i = 0; i < ms.size(); ++i) {
          CHECK(ms[i].time_hours >= 0.0);
          CHECK(ms[i].time_hours <= 48.0);
          if (i > 0) CHECK(ms[i].time_hours >= ms[i - 1].time_hours);
        }
      }
    }
  }

  TEST_CASE("group prevalences are honored on average and exclusively") {
    SyntheticCohortConfig config;
    config.n_patients = 600;
    config.n_variables = 2;
    config.seed = 13;
    config.groups = {{"a", 0.3, 1.0}, {"b", 0.2, 0.0}};
    int in_a = 0, in_b = 0;
    for (const auto& ep : generate_synthetic_cohort(config)) {
      CHECK(ep.groups.size() <= 1);  // mutually exclusive
      if (!ep.groups.empty()) {
        if (ep.groups[0] == "a") ++in_a;
        if (ep.groups[0] == "b") ++in_b;
      }
    }
    // Binomial counts: stay within ~4 sigma of the expectation.
    CHECK(std::fabs(in_a - 180.0) < 4.0 * std::sqrt(600 * 0.3 * 0.7));
    CHECK(std::fabs(in_b - 120.0) < 4.0 * std::sqrt(600 * 0.2 * 0.8));
  }

  TEST_CASE("invalid configurations are rejected") {
    SyntheticCohortConfig config;
    config.groups = {{"a", 0.7, 0.0}, {"b", 0.5, 0.0}};
    CHECK_THROWS(generate_synthetic_cohort(config));  // prevalences above 1
    SyntheticCohortConfig bad_rate;
    bad_rate.mortality_rate = 0.0;
    CHECK_THROWS(generate_synthetic_cohort(bad_rate));
  }
}

// ---------------------------------------------------------------------------
// Feature engineering vs hand-computed statistics
// ---------------------------------------------------------------------------

TEST_SUITE("features") {
  TEST_CASE("window statistics match hand computation") {
    Episode ep;
    ep.patient_id = "p1";
    ep.series["hr"] = {{0.0, 10.0}, {4.8, 20.0}, {24.0, 30.0}, {48.0, 40.0}};
    const FeatureMatrix fm = engineer_features({ep}, {"hr"});
    REQUIRE(fm.values.cols() == 42);
    REQUIRE(fm.values.rows() == 1);
    REQUIRE(fm.column_names[0] == "hr|full|min");

    auto cell = [&](const std::string& name) {
      for (int j = 0; j < fm.values.cols(); ++j) {
        if (fm.column_names[j] == name) return fm.values(0, j);
      }
      REQUIRE(false);
      return 0.0;
    };

    // full [0,48] inclusive: all four points.
    CHECK(cell("hr|full|min") == 10.0);
    CHECK(cell("hr|full|max") == 40.0);
    CHECK(cell("hr|full|mean") == 25.0);
    CHECK(cell("hr|full|std") == doctest::Approx(std::sqrt(125.0)).epsilon(1e-15));
    CHECK(cell("hr|full|skew") == 0.0);
    CHECK(cell("hr|full|count") == 4.0);
    // first10 = [0, 4.8): the boundary point 4.8 is excluded.
    CHECK(cell("hr|first10|count") == 1.0);
    CHECK(cell("hr|first10|mean") == 10.0);
    CHECK(cell("hr|first10|std") == 0.0);
    // last10 = [43.2, 48] with the axis end included.
    CHECK(cell("hr|last10|count") == 1.0);
    CHECK(cell("hr|last10|mean") == 40.0);
    // first25 [0,12): {10, 20}.
    CHECK(cell("hr|first25|count") == 2.0);
    CHECK(cell("hr|first25|mean") == 15.0);
    CHECK(cell("hr|first25|std") == 5.0);
    CHECK(cell("hr|first25|skew") == 0.0);
    // last50 [24,48]: {30, 40}.
    CHECK(cell("hr|last50|count") == 2.0);
    CHECK(cell("hr|last50|mean") == 35.0);
  }

  TEST_CASE("missing variables produce NaN stats and zero counts") {
    Episode with;
    with.patient_id = "p1";
    with.series["hr"] = {{1.0, 5.0}};
    Episode without;
    without.patient_id = "p2";
    without.series["sp"] = {{1.0, 9.0}};
    const FeatureMatrix fm = engineer_features({with, without}, {"hr", "sp"});
    REQUIRE(fm.values.cols() == 84);
    // p2 has no hr measurements: NaN stats, count 0.
    CHECK(std::isnan(fm.values(1, 0)));
    CHECK(fm.values(1, 5) == 0.0);  // hr|full|count
    CHECK(fm.values(0, 5) == 1.0);
    // Column order: variable-major, then the 7 windows, then the 6 stats.
    CHECK(fm.column_names[42] == "sp|full|min");
    CHECK(fm.column_names[41] == "hr|last50|count");
    CHECK(fm.row_ids == std::vector<std::string>{"p1", "p2"});
  }

  TEST_CASE("the 14-variable schema has 588 columns") {
    SyntheticCohortConfig config;
    config.n_patients = 5;
    config.n_variables = 14;
    config.seed = 1;
    const auto episodes = generate_synthetic_cohort(config);
    const FeatureMatrix fm = engineer_features(episodes, collect_variables(episodes));
    CHECK(fm.values.cols() == 588);
  }

  TEST_CASE("scaler fits on train rows only and imputes train means") {
    FeatureMatrix fm;
    fm.values = Matrix(4, 2);
    fm.column_names = {"a", "b"};
    fm.row_ids = {"r0", "r1", "r2", "r3"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // column a: train values {1, 3}; column b: train {5, NaN} -> impute 5.
    fm.values(0, 0) = 1.0;
    fm.values(0, 1) = 5.0;
    fm.values(1, 0) = 3.0;
    fm.values(1, 1) = nan;
    fm.values(2, 0) = 100.0;  // test row, must not affect the fit
    fm.values(2, 1) = 100.0;
    fm.values(3, 0) = nan;
    fm.values(3, 1) = 7.0;

    const ScalerStats st = fit_scaler(fm, {0, 1});
    CHECK(st.mean[0] == 2.0);
    CHECK(st.impute_mean[0] == 2.0);
    CHECK(st.stdev[0] == doctest::Approx(1.0));  // population std of {1,3}
    CHECK(st.mean[1] == 5.0);
    CHECK(st.stdev[1] == 1.0);  // constant after imputation -> floored to 1

    const FeatureMatrix scaled = apply_scaler(st, fm);
    CHECK(scaled.values(0, 0) == doctest::Approx(-1.0));
    CHECK(scaled.values(1, 0) == doctest::Approx(1.0));
    CHECK(scaled.values(3, 0) == doctest::Approx(0.0));  // imputed to mean
    CHECK(scaled.values(1, 1) == doctest::Approx(0.0));
    CHECK(scaled.values(2, 1) == doctest::Approx(95.0));

    CHECK_THROWS(fit_scaler(fm, {0}));  // needs two train rows
  }

  TEST_CASE("scaled training columns are centered and unit scale") {
    RngStream rng(19, "scale", 0);
    FeatureMatrix fm;
    fm.values = Matrix(50, 3);
    fm.column_names = {"a", "b", "c"};
    fm.row_ids.resize(50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 3; ++j) fm.values(i, j) = rng.normal() * (j + 1) + j;
    std::vector<int> train;
    for (int i = 0; i < 30; ++i) train.push_back(i);
    const FeatureMatrix scaled = apply_scaler(fit_scaler(fm, train), fm);
    for (int j = 0; j < 3; ++j) {
      double sum = 0.0, sum_sq = 0.0;
      for (int i : train) {
        sum += scaled.values(i, j);
        sum_sq += scaled.values(i, j) * scaled.values(i, j);
      }
      CHECK(std::fabs(sum / 30.0) < 1e-12);
      CHECK(sum_sq / 30.0 == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("split_dataset partitions deterministically with floor sizes") {
    RngStream rng(101, "split", 0);
    const double ratios[3] = {0.70, 0.15, 0.15};
    const DatasetSplit split = split_dataset(101, ratios, rng);
    CHECK(split.validation.size() == 15);  // floor(101 * 0.15)
    CHECK(split.test.size() == 15);
    CHECK(split.train.size() == 71);  // remainder
    std::set<int> seen;
    for (int r : split.train) seen.insert(r);
    for (int r : split.validation) seen.insert(r);
    for (int r : split.test) seen.insert(r);
    CHECK(seen.size() == 101);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 100);

    RngStream rng2(101, "split", 0);
    const DatasetSplit again = split_dataset(101, ratios, rng2);
    CHECK(again.train == split.train);
    CHECK(again.validation == split.validation);
    CHECK(again.test == split.test);

    RngStream rng3(102, "split", 0);
    CHECK(split_dataset(101, ratios, rng3).train != split.train);

    const double bad[3] = {0.5, 0.2, 0.2};
    RngStream rng4(1, "split", 0);
    CHECK_THROWS(split_dataset(10, bad, rng4));
  }

  TEST_CASE("perturb_feature scales one column and copies the rest bitwise") {
    RngStream rng(23, "perturb", 0);
    FeatureMatrix fm;
    fm.values = Matrix(10, 4);
    fm.column_names = {"a", "b", "c", "d"};
    fm.row_ids.resize(10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 4; ++j) fm.values(i, j) = rng.normal();
    const FeatureMatrix original = fm;
    const FeatureMatrix bumped = perturb_feature(fm, 2, 10.0);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (j == 2) {
          CHECK(bumped.values(i, j) == 10.0 * fm.values(i, j));
        } else {
          CHECK(bits_equal(bumped.values(i, j), fm.values(i, j)));
        }
      }
    }
    // The input is untouched.
    CHECK(std::memcmp(fm.values.data(), original.values.data(),
                      sizeof(double) * 40) == 0);
    CHECK_THROWS(perturb_feature(fm, 4, 2.0));
    CHECK_THROWS(perturb_feature(fm, -1, 2.0));
  }

  TEST_CASE("features CSV round-trips including missing cells") {
    Episode with;
    with.patient_id = "p1";
    with.series["hr"] = {{1.0, 5.5}, {2.0, 6.25}};
    Episode without;
    without.patient_id = "p2";
    without.series["sp"] = {{1.0, 9.0}};
    const FeatureMatrix fm = engineer_features({with, without}, {"hr", "sp"});
    TempDir dir("feat_rt");
    write_features_csv(fm, dir.file("f.csv"));
    const FeatureMatrix back = read_features_csv(dir.file("f.csv"));
    CHECK(back.column_names == fm.column_names);
    CHECK(back.row_ids == fm.row_ids);
    REQUIRE(back.values.rows() == fm.values.rows());
    REQUIRE(back.values.cols() == fm.values.cols());
    for (int i = 0; i < fm.values.rows(); ++i) {
      for (int j = 0; j < fm.values.cols(); ++j) {
        if (std::isnan(fm.values(i, j))) {
          CHECK(std::isnan(back.values(i, j)));
        } else {
          CHECK(bits_equal(back.values(i, j), fm.values(i, j)));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Flat run configuration
// ---------------------------------------------------------------------------

TEST_SUITE("runconfig") {
  TEST_CASE("config files must be flat JSON objects") {
    TempDir dir("cfg");
    write_file(dir.file("ok.json"),
               R"({"seed": 12, "models": ["NN", "PPCA"], "factors": [10, 100]})");
    const ordered_json cfg = load_flat_config(dir.file("ok.json"));
    CHECK(config_u64(cfg, "seed", 0) == 12);
    CHECK(config_string_list(cfg, "models", {}) ==
          std::vector<std::string>{"NN", "PPCA"});
    CHECK(config_double_list(cfg, "factors", {}) ==
          std::vector<double>{10.0, 100.0});
    CHECK(config_int(cfg, "missing", 7) == 7);

    write_file(dir.file("arr.json"), "[1,2]");
    CHECK_THROWS(load_flat_config(dir.file("arr.json")));
    write_file(dir.file("nested.json"), R"({"a": {"b": 1}})");
    CHECK_THROWS(load_flat_config(dir.file("nested.json")));
    write_file(dir.file("bad.json"), "{");
    CHECK_THROWS_WITH_AS(load_flat_config(dir.file("bad.json")),
                         doctest::Contains("bad.json"), std::runtime_error);
    CHECK_THROWS(load_flat_config(dir.file("does_not_exist.json")));
  }

  TEST_CASE("typed getters reject wrong shapes") {
    const ordered_json cfg = ordered_json::parse(
        R"({"seed": -3, "jobs": "four", "rate": 0.5, "name": "x"})");
    CHECK_THROWS(config_u64(cfg, "seed", 0));   // negative
    CHECK_THROWS(config_int(cfg, "jobs", 1));   // string
    CHECK(config_double(cfg, "rate", 0.0) == 0.5);
    CHECK(config_double(cfg, "seed", 0.0) == -3.0);
    CHECK(config_string(cfg, "name", "") == "x");
    CHECK_THROWS(config_string(cfg, "rate", ""));
  }

  TEST_CASE("comma lists parse strictly") {
    CHECK(parse_string_list("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(parse_string_list("") == std::vector<std::string>{});
    CHECK(parse_double_list("10,2.5,-1") == std::vector<double>{10.0, 2.5, -1.0});
    CHECK_THROWS(parse_double_list("10,abc"));
  }

  TEST_CASE("UQTAB_SEED fallback") {
    unsetenv("UQTAB_SEED");
    CHECK(env_seed(9) == 9);
    setenv("UQTAB_SEED", "42", 1);
    CHECK(env_seed(9) == 42);
    setenv("UQTAB_SEED", "4x2", 1);
    CHECK_THROWS(env_seed(9));
    setenv("UQTAB_SEED", "", 1);
    CHECK(env_seed(9) == 9);
    unsetenv("UQTAB_SEED");
  }

  TEST_CASE("run configuration round-trips through its JSON form") {
    RunConfig rc;
    rc.seed = 17;
    rc.models = {"NN", "AE"};
    rc.factors = {1.0, 10.0};
    const ordered_json j = run_config_to_json(rc);
    CHECK(config_u64(j, "seed", 0) == 17);
    CHECK(config_string_list(j, "models", {}) == rc.models);
    CHECK(config_double_list(j, "factors", {}) == rc.factors);
    CHECK(config_string(j, "out_dir", "") == ".");
  }
}
