#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqtab/episode.hpp"

namespace uqtab {

// One patient subgroup: `prevalence` of the cohort is tagged with `tag`,
// and every member's latent per-variable means are shifted by
// shift_scale * patient_sd (random fixed sign per variable). Groups are
// mutually exclusive, so prevalences must sum to at most 1.
struct GroupSpec {
  std::string tag;
  double prevalence = 0.0;
  double shift_scale = 0.0;
};

struct SyntheticCohortConfig {
  int n_patients = 1000;
  int n_variables = 14;
  double mortality_rate = 0.13;  // target empirical label rate, in (0,1)
  // Multiplier on the latent risk score inside the logistic label link;
  // higher = more separable outcome.
  double label_sharpness = 2.0;
  double patient_sd = 1.0;   // spread of per-patient latent means
  double noise_sd = 0.25;    // stationary sd of each series around its mean
  double ar_coeff = 0.8;     // order-1 autoregression coefficient, in [0,1)
  // Measurements per (patient, variable): roughly hourly bedside sampling
  // over the 48h window, so even the 10%-of-axis feature windows are
  // rarely empty.
  int min_obs = 32;
  int max_obs = 56;
  std::vector<GroupSpec> groups;
  std::uint64_t seed = 0;
};

// Draws a cohort of AR(1) vital-sign-style series. Per patient i and
// variable v the series fluctuates around a latent mean
//   m_iv = base_v + patient_sd * z_iv + sum_{g owning i} shift_g * patient_sd * dir_gv
// with z_iv ~ N(0,1). The outcome label is Bernoulli under a logistic link
// on a fixed unit-norm linear score of the z_iv; the intercept is found by
// bisection so the realized label rate matches `mortality_rate` to within
// half a patient. Fully deterministic given the config.
std::vector<Episode> generate_synthetic_cohort(const SyntheticCohortConfig& config);

}  // namespace uqtab
